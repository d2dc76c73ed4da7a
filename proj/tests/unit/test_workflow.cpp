// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include "pspt/checkpoint.hpp"
#include "pspt/commands.hpp"
#include "pspt/error.hpp"
#include "pspt/rng.hpp"
#include "pspt/run_file.hpp"
#include "pspt/vocab.hpp"

#include <json.hpp>
#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace pspt;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SyntheticConfig small_world() {
    SyntheticConfig c;
    c.topics = 160;
    c.train_questions = 24;
    c.test_questions = 8;
    c.corpus_sequences = 300;
    c.seed = 11;
    return c;
}

struct Workspace {
    fs::path dir;
    RunSpec spec;

    Workspace() {
        dir = fs::temp_directory_path() / ("pspt_workflow_" + std::to_string(::getpid()));
        fs::remove_all(dir);
        fs::create_directories(dir);
        spec.seed = 5;
        spec.synthetic = small_world();
        spec.model.dim = 16;
        spec.model.n_layers = 1;
        spec.model.max_seq_len = 64;
        spec.pretrain.steps = 5;
        spec.train.epochs = 1;
        spec.train.train_sample_size = 16;
        auto& p = spec.paths;
        p.dataset = path("train.jsonl");
        p.eval_dataset = path("test.jsonl");
        p.pretrain_corpus = path("corpus.txt");
        p.model = path("model.ckpt");
        p.params = path("params.ckpt");
        p.train_log = path("log.jsonl");
        p.run_in = path("bm25.run");
        p.run_out = path("out.run");
        cmd_synth(spec);
        cmd_init_model(spec);
        cmd_retrieve(spec);
    }
    ~Workspace() { fs::remove_all(dir); }

    std::string path(const std::string& name) const { return (dir / name).string(); }
};

} // namespace

TEST_CASE("config: closed world, overrides, dump round trip") {
    RunSpec d = default_run_spec();
    CHECK_NOTHROW(d.validate());
    auto again = parse_run_spec(dump_run_spec(d));
    CHECK(dump_run_spec(again) == dump_run_spec(d));

    try {
        parse_run_spec(R"({"seed": 1, "trian": {"epochs": 2}, "model": {"dims": 3}})");
        FAIL("expected configuration error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Configuration);
        const std::string msg = e.what();
        CHECK(msg.find("trian.epochs") != std::string::npos);
        CHECK(msg.find("model.dims") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_run_spec(R"({"train": {"epochs": "many"}})"), Error);
    CHECK_THROWS_AS(parse_run_spec(R"({"train": {"epochs": -1}})"), Error);
    CHECK_THROWS_AS(parse_run_spec("[1, 2]"), Error);

    apply_override(d, "train.epochs=3");
    apply_override(d, "adapter.hard_prompt=tell me");
    apply_override(d, "adapter.literal_concat=true");
    apply_override(d, "paths.runs=[\"a\",\"b\"]");
    apply_override(d, "paths.model=123");
    CHECK(d.train.epochs == 3);
    CHECK(d.adapter.hard_prompt == "tell me");
    CHECK(d.adapter.literal_concat);
    CHECK(d.paths.runs.size() == 2);
    CHECK(d.paths.model == "123");
    CHECK_THROWS_AS(apply_override(d, "nope=1"), Error);
    CHECK_THROWS_AS(apply_override(d, "train.epochs"), Error);

    RunSpec bad;
    bad.rerank.scorer = "magic";
    bad.adapter.r = 0;
    bad.model.n_heads = 5;
    try {
        bad.validate();
        FAIL("expected configuration error");
    } catch (const Error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("rerank.scorer") != std::string::npos);
        CHECK(msg.find("adapter.r") != std::string::npos);
        CHECK(msg.find("model") != std::string::npos);
    }
    for (const auto& k : config_keys()) CHECK_FALSE(k.doc.empty());
}

TEST_CASE("synthetic world") {
    auto a = generate_world(small_world());
    auto b = generate_world(small_world());
    std::ostringstream sa, sb;
    write_dataset(sa, a.train);
    write_dataset(sb, b.train);
    CHECK(sa.str() == sb.str());
    CHECK(a.corpus == b.corpus);

    auto full = generate_world(SyntheticConfig{});
    CHECK(full.train.size() + full.test.size() >= 300);
    std::set<std::string> train_ids;
    for (const auto& r : full.train.records()) train_ids.insert(r.question_id);
    for (const auto& r : full.test.records()) CHECK(train_ids.count(r.question_id) == 0);
    for (const auto* ds : {&full.train, &full.test}) {
        for (const auto& r : ds->records()) {
            REQUIRE(r.passages.size() == 20);
            CHECK(r.relevant_count() == 1);
            CHECK(r.passages[0].relevant);
            std::set<std::string> ids;
            for (const auto& p : r.passages) ids.insert(p.passage_id);
            CHECK(ids.size() == r.passages.size());
            // positive shares a content word with the question
            const auto q = split_words(r.question_text);
            const auto d = split_words(r.passages[0].text);
            bool shared = false;
            for (std::size_t i = 1; i < q.size(); ++i) {
                if (q[i] != "of" && std::find(d.begin(), d.end(), q[i]) != d.end()) shared = true;
            }
            CHECK(shared);
        }
    }
    SyntheticConfig tiny = small_world();
    tiny.topics = 10;
    CHECK_THROWS_AS(generate_world(tiny), Error);
}

TEST_CASE("commands: artifacts, errors and init equivalence") {
    Workspace w;
    RunSpec spec = w.spec;

    SUBCASE("init-model is reproducible and reports the closed-form fraction") {
        const auto first = slurp(spec.paths.model);
        const auto text = cmd_init_model(spec);
        CHECK(slurp(spec.paths.model) == first);
        const auto model = load_checkpoint(spec.paths.model);
        const double expected = static_cast<double>(theta_parameter_count(
                                    spec.adapter.l_s, model.config().vocab_size, spec.adapter.r, spec.model.dim)) /
                                static_cast<double>(model.parameter_count());
        CHECK(text.find("trainable fraction " + format_double(expected)) != std::string::npos);
        RunSpec missing = spec;
        missing.paths.dataset.clear();
        CHECK_THROWS_AS(cmd_init_model(missing), Error);
    }

    SUBCASE("epochs=0 writes the initialization") {
        spec.train.epochs = 0;
        cmd_train(spec);
        const auto model = load_checkpoint(spec.paths.model);
        const auto trained = load_params(spec.paths.params, model);
        const auto fresh = init_params(model, spec.adapter.hard_prompt, spec.adapter.l_s, spec.adapter.r,
                                       spec.adapter.alpha, Rng(spec.seed).fork(3).next_u64());
        CHECK(slurp(spec.paths.params) ==
              [&] {
                  std::ostringstream o;
                  write_checkpoint(o, params_checkpoint(fresh, model));
                  return o.str();
              }());
        CHECK(trained.parameter_count() == fresh.parameter_count());
    }

    SUBCASE("fresh pspt with a prompt-length soft prompt ranks like upr") {
        spec.train.epochs = 0;
        spec.adapter.l_s = split_words(spec.adapter.hard_prompt).size();
        cmd_train(spec);
        cmd_rerank(spec);
        const auto pspt = load_run(spec.paths.run_out);
        spec.rerank.scorer = "upr";
        spec.paths.run_out = w.path("upr.run");
        cmd_rerank(spec);
        const auto upr = load_run(spec.paths.run_out);
        const auto input = load_run(spec.paths.run_in);
        REQUIRE(pspt.queries.size() == upr.queries.size());
        for (std::size_t i = 0; i < pspt.queries.size(); ++i) {
            std::vector<std::string> a, b, in;
            for (const auto& e : pspt.queries[i].entries) a.push_back(e.passage_id);
            for (const auto& e : upr.queries[i].entries) b.push_back(e.passage_id);
            for (const auto& e : input.queries[i].entries) in.push_back(e.passage_id);
            CHECK(a == b);
            std::sort(a.begin(), a.end());
            std::sort(in.begin(), in.end());
            CHECK(a == in);
        }
        CHECK(pspt.tag == "pspt");
        CHECK(upr.tag == "upr");
    }

    SUBCASE("rerank is byte-identical across reruns and worker counts") {
        cmd_train(spec);
        for (const char* scorer : {"pspt", "upr", "upr_inst"}) {
            spec.rerank.scorer = scorer;
            spec.workers = 1;
            spec.paths.run_out = w.path("one.run");
            cmd_rerank(spec);
            spec.workers = 4;
            spec.paths.run_out = w.path("four.run");
            cmd_rerank(spec);
            CHECK(slurp(w.path("one.run")) == slurp(w.path("four.run")));
        }
    }

    SUBCASE("rerank rejects unknown ids") {
        cmd_train(spec);
        std::ofstream(w.path("bad.run")) << "q0024 Q0 nowhere 1 0 bm25\n";
        spec.paths.run_in = w.path("bad.run");
        try {
            cmd_rerank(spec);
            FAIL("expected input error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Input);
            CHECK(std::string(e.what()).find("nowhere") != std::string::npos);
        }
    }

    SUBCASE("eval: single run has no p-values, duplicated run gives p = 1") {
        spec.paths.runs = {spec.paths.run_in};
        const auto single = cmd_eval(spec);
        CHECK(single.find("bm25") != std::string::npos);
        CHECK(single.find("p < 0.05") == std::string::npos);
        const auto run = load_run(spec.paths.run_in);
        auto twin = run;
        twin.tag = "twin";
        save_run(w.path("twin.run"), twin);
        spec.paths.runs.push_back(w.path("twin.run"));
        spec.paths.report = w.path("report.json");
        cmd_eval(spec);
        const auto report = nlohmann::json::parse(slurp(spec.paths.report));
        REQUIRE(report["runs"][1]["tag"] == "twin");
        REQUIRE(report["runs"][1]["p_values"].size() == 2 * spec.eval.ks.size());
        for (const auto& [k, v] : report["runs"][1]["p_values"].items()) CHECK(v.get<double>() == 1.0);
    }
}
