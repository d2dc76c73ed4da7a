// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0

#include "pspt/commands.hpp"

#include "pspt/bm25.hpp"
#include "pspt/checkpoint.hpp"
#include "pspt/error.hpp"
#include "pspt/log.hpp"
#include "pspt/rng.hpp"
#include "pspt/run_file.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace pspt {

namespace {

// Independent seed per consumer so adding one never shifts another.
enum Stream : std::uint64_t { kModelInit = 1, kPretrain = 2, kThetaInit = 3, kInstances = 4 };

std::uint64_t derive_seed(std::uint64_t seed, Stream stream) {
    return Rng(seed).fork(stream).next_u64();
}

const std::string& require_path(const std::string& value, const char* key, const char* command) {
    if (value.empty()) fail(ErrorKind::Configuration, std::string("paths.") + key + " is required for " + command);
    return value;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    out.flush();
    if (!out) fail(ErrorKind::Io, "cannot write '" + path + "'");
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        if (line.find_first_not_of(" \t\r") != std::string::npos) lines.push_back(line);
    }
    return lines;
}

std::vector<TokenIds> tokenize_corpus(const std::vector<std::string>& lines, const Vocabulary& vocab) {
    std::vector<TokenIds> out;
    out.reserve(lines.size());
    for (const auto& l : lines) out.push_back(vocab.tokenize(l));
    return out;
}

std::string pretrain_model(MicroLM<float>& model, const RunSpec& spec, const char* command) {
    const auto lines = read_lines(require_path(spec.paths.pretrain_corpus, "pretrain_corpus", command));
    PretrainConfig cfg = spec.pretrain;
    cfg.seed = derive_seed(spec.seed, kPretrain);
    const auto res = pretrain_micro_lm(model, tokenize_corpus(lines, model.vocab()), cfg);
    char buf[160];
    std::snprintf(buf, sizeof buf, "pretrained %zu steps on %zu sequences: held-out loss %.4f -> %.4f\n",
                  cfg.steps, res.train_sequences, res.initial_loss, res.final_loss);
    return buf;
}

MicroLM<float> load_frozen_model(const RunSpec& spec, const char* command) {
    auto model = load_checkpoint(require_path(spec.paths.model, "model", command));
    model.set_trainable(false);
    return model;
}

AssembleOptions assemble_options(const RunSpec& spec) {
    AssembleOptions o;
    o.literal_concat = spec.adapter.literal_concat;
    return o;
}

// First training question with a relevant passage, in file order.
std::string inst_prompt(const RunSpec& spec) {
    const auto ds = load_dataset(require_path(spec.paths.dataset, "dataset", "rerank with upr_inst"));
    for (const auto& rec : ds.records()) {
        for (const auto& p : rec.passages) {
            if (p.relevant) return upr_inst_prompt(spec.adapter.hard_prompt, p.text, rec.question_text);
        }
    }
    fail(ErrorKind::Data, "no question in '" + spec.paths.dataset + "' has a relevant passage for the example");
}

} // namespace

std::size_t theta_parameter_count(std::size_t l_s, std::size_t vocab_size, std::size_t r, std::size_t dim) {
    return l_s * dim + vocab_size * r + r * dim;
}

std::string cmd_synth(const RunSpec& spec) {
    spec.validate();
    const auto& train_path = require_path(spec.paths.dataset, "dataset", "synth");
    const auto& test_path = require_path(spec.paths.eval_dataset, "eval_dataset", "synth");
    SyntheticConfig cfg = spec.synthetic;
    cfg.seed = spec.seed;
    const auto world = generate_world(cfg);
    save_dataset(train_path, world.train);
    save_dataset(test_path, world.test);
    std::ostringstream out;
    out << "wrote " << world.train.size() << " questions to " << train_path << "\n";
    out << "wrote " << world.test.size() << " questions to " << test_path << "\n";
    if (!spec.paths.pretrain_corpus.empty()) {
        std::string text;
        for (const auto& line : world.corpus) text += line + "\n";
        write_text(spec.paths.pretrain_corpus, text);
        out << "wrote " << world.corpus.size() << " sequences to " << spec.paths.pretrain_corpus << "\n";
    }
    return out.str();
}

std::string cmd_init_model(const RunSpec& spec) {
    spec.validate();
    const auto& out_path = require_path(spec.paths.model, "model", "init-model");
    std::vector<std::string> texts = load_dataset(require_path(spec.paths.dataset, "dataset", "init-model")).texts();
    if (!spec.paths.eval_dataset.empty()) {
        for (auto& t : load_dataset(spec.paths.eval_dataset).texts()) texts.push_back(std::move(t));
    }
    if (!spec.paths.pretrain_corpus.empty()) {
        for (auto& t : read_lines(spec.paths.pretrain_corpus)) texts.push_back(std::move(t));
    }
    std::vector<std::string> required = split_words(spec.adapter.hard_prompt);
    for (const auto& w : split_words(kSeparatorText)) required.push_back(w);
    auto vocab = Vocabulary::build(texts, spec.vocab_cap, required);

    ModelConfig mc = spec.model;
    mc.vocab_size = vocab.size();
    auto model = MicroLM<float>::random_init(mc, std::move(vocab), derive_seed(spec.seed, kModelInit));
    std::string report;
    if (spec.pretrain.steps > 0) report += pretrain_model(model, spec, "init-model");
    save_checkpoint(model, out_path);

    const std::size_t phi = model.parameter_count();
    const std::size_t theta = theta_parameter_count(spec.adapter.l_s, mc.vocab_size, spec.adapter.r, mc.dim);
    const double fraction = static_cast<double>(theta) / static_cast<double>(phi);
    std::ostringstream out;
    out << report;
    out << "vocabulary " << mc.vocab_size << " tokens\n";
    out << "phi (frozen) " << phi << " parameters\n";
    out << "theta (trainable) " << theta << " parameters (l_s=" << spec.adapter.l_s << ", r=" << spec.adapter.r
        << ", dim=" << mc.dim << ")\n";
    out << "trainable fraction " << format_double(fraction) << " (" << format_double(100.0 * fraction)
        << "% of phi)\n";
    out << "checksum " << model.checksum() << "\n";
    out << "wrote " << out_path << "\n";
    return out.str();
}

std::string cmd_pretrain(const RunSpec& spec) {
    spec.validate();
    const auto& out_path = require_path(spec.paths.model, "model", "pretrain");
    auto model = load_checkpoint(require_path(spec.paths.base_model, "base_model", "pretrain"));
    if (spec.pretrain.steps == 0) log_info("warning: pretrain.steps is 0; the model is copied unchanged");
    std::string report = pretrain_model(model, spec, "pretrain");
    save_checkpoint(model, out_path);
    return report + "wrote " + out_path + "\n";
}

std::string cmd_train(const RunSpec& spec) {
    spec.validate();
    const auto& out_path = require_path(spec.paths.params, "params", "train");
    const auto model = load_frozen_model(spec, "train");
    const auto dataset = load_dataset(require_path(spec.paths.dataset, "dataset", "train"));

    TrainConfig cfg = spec.train;
    cfg.seed = spec.seed;
    cfg.literal_concat = spec.adapter.literal_concat;
    auto params = init_params(model, spec.adapter.hard_prompt, spec.adapter.l_s, spec.adapter.r,
                              spec.adapter.alpha, derive_seed(spec.seed, kThetaInit));
    const auto instances =
        build_instances(dataset, model.vocab(), derive_seed(spec.seed, kInstances), cfg.train_sample_size);
    const auto result = train(cfg, instances, model, params);
    if (result.model_checksum_before != result.model_checksum_after) {
        fail(ErrorKind::Numeric, "frozen model changed during training");
    }
    save_params(params, model, out_path);
    if (!spec.paths.train_log.empty()) {
        std::string log;
        for (const auto& line : result.log) log += line + "\n";
        write_text(spec.paths.train_log, log);
    }
    char buf[200];
    std::snprintf(buf, sizeof buf, "%zu instances, %zu steps, best epoch %zu, dev loss %.4f -> %.4f\n",
                  instances.size(), result.steps, result.best_epoch, result.initial_dev_loss,
                  result.best_dev_loss);
    return std::string(buf) + "wrote " + out_path + "\n";
}

std::string cmd_retrieve(const RunSpec& spec) {
    spec.validate();
    const auto& out_path = require_path(spec.paths.run_in, "run_in", "retrieve");
    const auto dataset = load_dataset(require_path(spec.paths.eval_dataset, "eval_dataset", "retrieve"));
    const auto run = bm25_run(dataset, spec.retrieve.k, spec.retrieve.corpus_mode,
                              Bm25Params{spec.retrieve.k1, spec.retrieve.b});
    save_run(out_path, run);
    return "retrieved top " + std::to_string(spec.retrieve.k) + " for " + std::to_string(run.queries.size()) +
           " questions\nwrote " + out_path + "\n";
}

std::string cmd_rerank(const RunSpec& spec) {
    spec.validate();
    const auto& out_path = require_path(spec.paths.run_out, "run_out", "rerank");
    const auto input = load_run(require_path(spec.paths.run_in, "run_in", "rerank"));
    const auto dataset = load_dataset(require_path(spec.paths.eval_dataset, "eval_dataset", "rerank"));
    const auto model = load_frozen_model(spec, "rerank");
    const ScoreMode mode = parse_score_mode(spec.adapter.score_mode);
    const std::string& scorer = spec.rerank.scorer;

    PsptParams<float> params;
    std::string prompt = spec.adapter.hard_prompt;
    if (scorer == "pspt") {
        params = load_params(require_path(spec.paths.params, "params", "rerank with pspt"), model);
        params.set_trainable(false);
    } else if (scorer == "upr_inst") {
        prompt = inst_prompt(spec);
    }
    const auto options = assemble_options(spec);

    RetrievalRun out;
    out.tag = scorer;
    for (const auto& q : input.queries) {
        const QaRecord* rec = dataset.find(q.query_id);
        if (rec == nullptr) fail(ErrorKind::Input, "run query '" + q.query_id + "' is not in the dataset");
        const TokenIds question = model.vocab().tokenize(rec->question_text);
        std::vector<Candidate> candidates;
        const std::size_t depth = spec.rerank.depth == 0 ? q.entries.size()
                                                         : std::min(spec.rerank.depth, q.entries.size());
        for (std::size_t i = 0; i < depth; ++i) {
            const auto& e = q.entries[i];
            const Passage* p = rec->find_passage(e.passage_id);
            if (p == nullptr) {
                fail(ErrorKind::Input, "passage '" + e.passage_id + "' of query '" + q.query_id +
                                           "' is not in the dataset");
            }
            candidates.push_back({e.passage_id, p->text, e.rank, e.score, 0.0});
        }
        CandidateScorer fn = [&](const Candidate& c) {
            const TokenIds passage = model.vocab().tokenize(c.text);
            if (scorer == "pspt") return score_pspt(question, passage, params, model, mode, options).value;
            return score_upr(question, passage, model, prompt, mode).value;
        };
        QueryRanking ranking{q.query_id, {}};
        const auto ranked = rerank(std::move(candidates), fn, spec.workers);
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            ranking.entries.push_back({ranked[i].passage_id, i + 1, ranked[i].score});
        }
        out.queries.push_back(std::move(ranking));
    }
    save_run(out_path, out);
    return "reranked " + std::to_string(out.queries.size()) + " questions with " + scorer + "\nwrote " +
           out_path + "\n";
}

std::string cmd_eval(const RunSpec& spec) {
    spec.validate();
    if (spec.paths.runs.empty()) fail(ErrorKind::Configuration, "paths.runs is required for eval");
    const auto dataset = load_dataset(require_path(spec.paths.eval_dataset, "eval_dataset", "eval"));
    std::vector<RetrievalRun> runs;
    for (const auto& path : spec.paths.runs) {
        for (auto& r : load_runs(path)) runs.push_back(std::move(r));
    }
    const auto report = evaluate(runs, dataset, spec.eval);
    if (!spec.paths.report.empty()) write_text(spec.paths.report, report_json(report));
    return report_table(report);
}

} // namespace pspt
