// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0

#include "pspt/config.hpp"

#include "pspt/error.hpp"

#include <json.hpp>

#include <fstream>
#include <functional>
#include <sstream>

namespace pspt {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

struct Binding {
    ConfigKey key;
    std::function<json(const RunSpec&)> get;
    std::function<void(RunSpec&, const json&)> set; // throws json::exception on a type mismatch
};

template <typename F>
Binding bind(std::string name, std::string type, std::string doc, F field) {
    Binding b{{std::move(name), std::move(type), std::move(doc)}, {}, {}};
    b.get = [field](const RunSpec& s) { return json(field(const_cast<RunSpec&>(s))); };
    b.set = [field, type = b.key.type](RunSpec& s, const json& v) {
        auto& f = field(s);
        using V = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<V, bool>) {
            if (!v.is_boolean()) throw std::invalid_argument("expected a boolean");
        } else if constexpr (std::is_integral_v<V>) {
            if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0)) {
                throw std::invalid_argument("expected a non-negative integer");
            }
        } else if constexpr (std::is_floating_point_v<V>) {
            if (!v.is_number()) throw std::invalid_argument("expected a number");
        } else if constexpr (std::is_same_v<V, std::string>) {
            if (!v.is_string()) throw std::invalid_argument("expected a string");
        } else {
            if (!v.is_array()) throw std::invalid_argument("expected an array");
        }
        f = v.get<V>();
    };
    return b;
}

#define FIELD(expr) [](RunSpec& s) -> auto& { return s.expr; }

const std::vector<Binding>& bindings() {
    static const std::vector<Binding> table{
        bind("seed", "int", "master seed; every random stream is derived from it", FIELD(seed)),
        bind("workers", "int", "rerank worker threads", FIELD(workers)),
        bind("vocab_cap", "int", "maximum vocabulary size including specials", FIELD(vocab_cap)),

        bind("model.dim", "int", "embedding width", FIELD(model.dim)),
        bind("model.n_layers", "int", "transformer blocks", FIELD(model.n_layers)),
        bind("model.n_heads", "int", "attention heads; must divide dim", FIELD(model.n_heads)),
        bind("model.max_seq_len", "int", "positions", FIELD(model.max_seq_len)),
        bind("model.ffn_mult", "int", "feed-forward width as a multiple of dim", FIELD(model.ffn_mult)),

        bind("pretrain.steps", "int", "language-model steps; init-model pretrains when > 0", FIELD(pretrain.steps)),
        bind("pretrain.batch_size", "int", "sequences per step", FIELD(pretrain.batch_size)),
        bind("pretrain.lr", "float", "Adam learning rate", FIELD(pretrain.lr)),
        bind("pretrain.clip_norm", "float", "global gradient norm limit", FIELD(pretrain.clip_norm)),
        bind("pretrain.held_out_fraction", "float", "sequences kept for the loss report",
             FIELD(pretrain.held_out_fraction)),

        bind("adapter.l_s", "int", "soft prompt length", FIELD(adapter.l_s)),
        bind("adapter.r", "int", "adapter rank", FIELD(adapter.r)),
        bind("adapter.alpha", "float", "adapter scale numerator (scale = alpha / r)", FIELD(adapter.alpha)),
        bind("adapter.hard_prompt", "string", "prompt text; initializes the soft prompt and drives upr",
             FIELD(adapter.hard_prompt)),
        bind("adapter.literal_concat", "bool", "also append the plain passage embeddings",
             FIELD(adapter.literal_concat)),
        bind("adapter.score_mode", "string", "sum | mean log-likelihood", FIELD(adapter.score_mode)),

        bind("train.batch_size", "int", "instances per step", FIELD(train.batch_size)),
        bind("train.in_batch_negatives", "int", "negatives per instance after in-batch expansion",
             FIELD(train.in_batch_negatives)),
        bind("train.epochs", "int", "passes over the training split", FIELD(train.epochs)),
        bind("train.lr_soft_prompt", "float", "initial learning rate of e1", FIELD(train.lr_soft_prompt)),
        bind("train.lr_adapter", "float", "initial learning rate of A and B", FIELD(train.lr_adapter)),
        bind("train.early_stop_patience", "int", "epochs without dev improvement before stopping",
             FIELD(train.early_stop_patience)),
        bind("train.train_sample_size", "int", "questions sampled into training instances",
             FIELD(train.train_sample_size)),
        bind("train.dev_fraction", "float", "instances held out for early stopping", FIELD(train.dev_fraction)),
        bind("train.clip_norm", "float", "global gradient norm limit", FIELD(train.clip_norm)),
        bind("train.weight_point", "float", "weight of the likelihood term", FIELD(train.weight_point)),
        bind("train.weight_pair", "float", "weight of the hinge term", FIELD(train.weight_pair)),

        bind("rerank.scorer", "string", "pspt | upr | upr_inst", FIELD(rerank.scorer)),
        bind("rerank.depth", "int", "candidates reranked per query; 0 = all", FIELD(rerank.depth)),

        bind("retrieve.k", "int", "BM25 depth", FIELD(retrieve.k)),
        bind("retrieve.corpus_mode", "bool", "search all passages instead of each question's pool",
             FIELD(retrieve.corpus_mode)),
        bind("retrieve.k1", "float", "BM25 k1", FIELD(retrieve.k1)),
        bind("retrieve.b", "float", "BM25 b", FIELD(retrieve.b)),

        bind("eval.ks", "int_list", "cutoffs for R@k and H@k", FIELD(eval.ks)),
        bind("eval.capped_recall", "bool", "divide recall by min(|relevant|, k)", FIELD(eval.capped_recall)),
        bind("eval.baseline_tag", "string", "run compared against; empty = first run", FIELD(eval.baseline_tag)),

        bind("synthetic.k_classes", "int", "topic word classes", FIELD(synthetic.k_classes)),
        bind("synthetic.k_class_size", "int", "words per topic class", FIELD(synthetic.k_class_size)),
        bind("synthetic.d_classes", "int", "descriptor word classes", FIELD(synthetic.d_classes)),
        bind("synthetic.d_class_size", "int", "words per descriptor class", FIELD(synthetic.d_class_size)),
        bind("synthetic.neutral_words", "int", "prefix filler words", FIELD(synthetic.neutral_words)),
        bind("synthetic.topics", "int", "passages", FIELD(synthetic.topics)),
        bind("synthetic.train_questions", "int", "questions written to paths.dataset",
             FIELD(synthetic.train_questions)),
        bind("synthetic.test_questions", "int", "questions written to paths.eval_dataset",
             FIELD(synthetic.test_questions)),
        bind("synthetic.pool_size", "int", "candidate passages per question", FIELD(synthetic.pool_size)),
        bind("synthetic.min_confusers", "int", "fewest pool passages sharing the question's descriptors",
             FIELD(synthetic.min_confusers)),
        bind("synthetic.max_confusers", "int", "most pool passages sharing the question's descriptors",
             FIELD(synthetic.max_confusers)),
        bind("synthetic.corpus_sequences", "int", "lines written to paths.pretrain_corpus",
             FIELD(synthetic.corpus_sequences)),

        bind("paths.dataset", "string", "training questions (JSON lines)", FIELD(paths.dataset)),
        bind("paths.eval_dataset", "string", "evaluation questions (JSON lines)", FIELD(paths.eval_dataset)),
        bind("paths.pretrain_corpus", "string", "pretraining text, one sequence per line",
             FIELD(paths.pretrain_corpus)),
        bind("paths.base_model", "string", "checkpoint read by pretrain", FIELD(paths.base_model)),
        bind("paths.model", "string", "language-model checkpoint", FIELD(paths.model)),
        bind("paths.params", "string", "adapter checkpoint", FIELD(paths.params)),
        bind("paths.train_log", "string", "training log (JSON lines)", FIELD(paths.train_log)),
        bind("paths.run_in", "string", "first-stage run; written by retrieve, read by rerank",
             FIELD(paths.run_in)),
        bind("paths.run_out", "string", "reranked run", FIELD(paths.run_out)),
        bind("paths.runs", "string_list", "runs compared by eval", FIELD(paths.runs)),
        bind("paths.report", "string", "JSON report written by eval", FIELD(paths.report)),
    };
    return table;
}

#undef FIELD

const Binding* find_binding(const std::string& name) {
    for (const auto& b : bindings()) {
        if (b.key.name == name) return &b;
    }
    return nullptr;
}

void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string name = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (it->is_object()) {
            flatten(*it, name, out);
        } else {
            out.emplace_back(name, *it);
        }
    }
}

std::string join_problems(const std::vector<std::string>& problems) {
    std::string msg;
    for (const auto& p : problems) msg += (msg.empty() ? "" : "; ") + p;
    return msg;
}

} // namespace

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> k;
        for (const auto& b : bindings()) k.push_back(b.key);
        return k;
    }();
    return keys;
}

RunSpec default_run_spec() {
    return RunSpec{};
}

void RunSpec::validate() const {
    std::vector<std::string> problems;
    auto check = [&](const std::string& key, auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            problems.push_back(key + ": " + e.what());
        }
    };
    check("model", [&] {
        ModelConfig m = model;
        m.vocab_size = 4;
        m.validate();
    });
    check("train", [&] { train.validate(); });
    check("synthetic", [&] { synthetic.validate(); });
    check("adapter.score_mode", [&] { parse_score_mode(adapter.score_mode); });
    if (adapter.l_s == 0) problems.push_back("adapter.l_s: must be at least 1");
    if (adapter.r == 0 || adapter.r > model.dim) problems.push_back("adapter.r: must be in [1, model.dim]");
    if (!(adapter.alpha > 0)) problems.push_back("adapter.alpha: must be positive");
    if (rerank.scorer != "pspt" && rerank.scorer != "upr" && rerank.scorer != "upr_inst") {
        problems.push_back("rerank.scorer: '" + rerank.scorer + "' is not one of pspt, upr, upr_inst");
    }
    if (workers == 0) problems.push_back("workers: must be at least 1");
    if (retrieve.k == 0) problems.push_back("retrieve.k: must be at least 1");
    if (pretrain.batch_size == 0) problems.push_back("pretrain.batch_size: must be at least 1");
    if (!(pretrain.lr > 0)) problems.push_back("pretrain.lr: must be positive");
    if (!(pretrain.held_out_fraction >= 0 && pretrain.held_out_fraction < 1)) {
        problems.push_back("pretrain.held_out_fraction: must be in [0, 1)");
    }
    if (eval.ks.empty()) problems.push_back("eval.ks: must not be empty");
    for (auto k : eval.ks) {
        if (k == 0) problems.push_back("eval.ks: cutoffs must be at least 1");
    }
    if (vocab_cap < kNumSpecialTokens + 1) problems.push_back("vocab_cap: too small");
    if (!problems.empty()) fail(ErrorKind::Configuration, "invalid config: " + join_problems(problems));
}

RunSpec parse_run_spec(const std::string& json_text, const std::string& source) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::Configuration, source + ": not valid JSON: " + e.what());
    }
    if (!j.is_object()) fail(ErrorKind::Configuration, source + ": top level must be an object");
    std::vector<std::pair<std::string, json>> flat;
    flatten(j, "", flat);
    RunSpec spec;
    std::vector<std::string> unknown, bad;
    for (const auto& [name, value] : flat) {
        const Binding* b = find_binding(name);
        if (b == nullptr) {
            unknown.push_back(name);
            continue;
        }
        try {
            b->set(spec, value);
        } catch (const std::exception& e) {
            bad.push_back(name + " (" + e.what() + ")");
        }
    }
    std::vector<std::string> problems;
    if (!unknown.empty()) problems.push_back("unknown keys: " + join_problems(unknown));
    if (!bad.empty()) problems.push_back("bad values: " + join_problems(bad));
    if (!problems.empty()) fail(ErrorKind::Configuration, source + ": " + join_problems(problems));
    return spec;
}

RunSpec load_run_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_spec(ss.str(), path);
}

void apply_override(RunSpec& spec, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        fail(ErrorKind::Configuration, "override '" + assignment + "' is not key=value");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    const Binding* b = find_binding(key);
    if (b == nullptr) fail(ErrorKind::Configuration, "unknown config key '" + key + "'");
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded() || (b->key.type == "string" && !value.is_string())) value = text;
    try {
        b->set(spec, value);
    } catch (const std::exception& e) {
        fail(ErrorKind::Configuration, "config key '" + key + "': " + e.what());
    }
}

std::string dump_run_spec(const RunSpec& spec) {
    ordered_json out = ordered_json::object();
    for (const auto& b : bindings()) {
        ordered_json* node = &out;
        std::string rest = b.key.name;
        for (auto dot = rest.find('.'); dot != std::string::npos; dot = rest.find('.')) {
            node = &(*node)[rest.substr(0, dot)];
            rest = rest.substr(dot + 1);
        }
        (*node)[rest] = ordered_json::parse(b.get(spec).dump());
    }
    return out.dump(2) + "\n";
}

} // namespace pspt
