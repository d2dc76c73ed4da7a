// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0
//
// pspt command-line tool. Talks to the library through the C interface only.

#include "pspt/pspt.h"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

namespace {

int report_failure(pspt_status status) {
    std::fprintf(stderr, "pspt: %s\n", pspt_last_error());
    return pspt_exit_code(status);
}

struct Handles {
    pspt_config* config = nullptr;
    ~Handles() { pspt_config_free(config); }
};

using CommandFn = pspt_status (*)(const pspt_config*, char**);

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Passage reranking with a tuned soft prompt and a low-rank passage adapter"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", pspt_version());

    std::string config_path;
    std::vector<std::string> overrides;
    long long seed = -1;
    long long workers = -1;
    app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "master seed (overrides the config)");
    app.add_option("--workers", workers, "rerank worker threads (overrides the config)");
    app.add_option("--set", overrides, "override a config key, e.g. --set train.epochs=5")
        ->allow_extra_args(false)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);

    auto* synth = app.add_subcommand("synth", "generate the synthetic datasets and pretraining corpus");
    auto* init = app.add_subcommand("init-model", "build the vocabulary and write a language-model checkpoint");
    auto* pretrain = app.add_subcommand("pretrain", "continue training paths.base_model into paths.model");
    auto* train = app.add_subcommand("train", "tune the soft prompt and passage adapter");
    auto* retrieve = app.add_subcommand("retrieve", "BM25 over the evaluation pools");
    auto* rerank = app.add_subcommand("rerank", "rescore a run with pspt, upr or upr_inst");
    auto* eval = app.add_subcommand("eval", "recall and hit rate of runs, with t-tests");
    auto* show = app.add_subcommand("config", "print the effective configuration");

    std::string scorer, run_in, run_out;
    rerank->add_option("--scorer", scorer, "pspt | upr | upr_inst");
    rerank->add_option("--in", run_in, "input run file");
    rerank->add_option("--out", run_out, "output run file");
    std::vector<std::string> runs;
    std::string baseline, report;
    eval->add_option("runs", runs, "run files");
    eval->add_option("--baseline", baseline, "tag the other runs are tested against");
    eval->add_option("--report", report, "JSON report path");

    CLI11_PARSE(app, argc, argv);

    if (const char* level = std::getenv("PSPT_LOG")) {
        if (pspt_status s = pspt_set_log_level(level); s != PSPT_OK) return report_failure(s);
    }

    Handles h;
    pspt_status s = config_path.empty() ? pspt_config_new(&h.config) : pspt_config_load(config_path.c_str(), &h.config);
    if (s != PSPT_OK) return report_failure(s);

    std::vector<std::string> sets = overrides;
    if (seed >= 0) sets.push_back("seed=" + std::to_string(seed));
    if (workers >= 0) sets.push_back("workers=" + std::to_string(workers));
    if (!scorer.empty()) sets.push_back("rerank.scorer=" + scorer);
    if (!run_in.empty()) sets.push_back("paths.run_in=" + run_in);
    if (!run_out.empty()) sets.push_back("paths.run_out=" + run_out);
    if (!baseline.empty()) sets.push_back("eval.baseline_tag=" + baseline);
    if (!report.empty()) sets.push_back("paths.report=" + report);
    if (!runs.empty()) {
        std::string list = "paths.runs=[";
        for (std::size_t i = 0; i < runs.size(); ++i) {
            list += (i ? "," : "") + std::string("\"") + runs[i] + "\"";
        }
        sets.push_back(list + "]");
    }
    for (const auto& a : sets) {
        if ((s = pspt_config_set(h.config, a.c_str())) != PSPT_OK) return report_failure(s);
    }

    char* text = nullptr;
    if (show->parsed()) {
        if ((s = pspt_config_validate(h.config)) != PSPT_OK) return report_failure(s);
        s = pspt_config_dump(h.config, &text);
    } else {
        const std::pair<CLI::App*, CommandFn> commands[] = {
            {synth, pspt_cmd_synth},       {init, pspt_cmd_init_model}, {pretrain, pspt_cmd_pretrain},
            {train, pspt_cmd_train},       {retrieve, pspt_cmd_retrieve}, {rerank, pspt_cmd_rerank},
            {eval, pspt_cmd_eval},
        };
        for (const auto& [sub, fn] : commands) {
            if (sub->parsed()) s = fn(h.config, &text);
        }
    }
    if (s != PSPT_OK) return report_failure(s);
    std::fputs(text, stdout);
    pspt_string_free(text);
    return 0;
}
