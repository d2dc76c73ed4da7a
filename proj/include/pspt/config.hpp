// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "pspt/metrics.hpp"
#include "pspt/model.hpp"
#include "pspt/pretrain.hpp"
#include "pspt/scoring.hpp"
#include "pspt/synthetic.hpp"
#include "pspt/trainer.hpp"

#include <string>
#include <vector>

namespace pspt {

struct PathsSpec {
    std::string dataset;         // training questions
    std::string eval_dataset;    // questions scored by retrieve / rerank / eval
    std::string pretrain_corpus; // one sequence per line
    std::string base_model;      // input of `pretrain`
    std::string model;           // frozen LM checkpoint
    std::string params;          // adapter checkpoint
    std::string train_log;
    std::string run_in;
    std::string run_out;
    std::vector<std::string> runs;
    std::string report;
};

struct AdapterSpec {
    std::size_t l_s = 8;
    std::size_t r = 1;
    double alpha = 16.0;
    std::string hard_prompt = "please generate question for this passage";
    bool literal_concat = false;
    std::string score_mode = "sum";
};

struct RerankSpec {
    std::string scorer = "pspt"; // pspt | upr | upr_inst
    std::size_t depth = 0;       // 0 keeps every candidate of the input run
};

struct RetrieveSpec {
    std::size_t k = 10;
    bool corpus_mode = false;
    double k1 = 0.9;
    double b = 0.4;
};

/// Everything a command needs. Loaded from a JSON object whose nested keys
/// mirror the dotted names listed by `config_keys()`.
struct RunSpec {
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::size_t vocab_cap = 2048;
    ModelConfig model{0, 64, 2, 4, 256, 4}; // vocab_size comes from the data
    PretrainConfig pretrain{0, 16, 3e-3, 1.0, 0.1, 0};
    AdapterSpec adapter;
    TrainConfig train;
    RerankSpec rerank;
    RetrieveSpec retrieve;
    EvalOptions eval;
    SyntheticConfig synthetic;
    PathsSpec paths;

    /// Throws Configuration listing every invalid key.
    void validate() const;
};

struct ConfigKey {
    std::string name;
    std::string type; // int | float | bool | string | string_list | int_list
    std::string doc;
};

const std::vector<ConfigKey>& config_keys();

RunSpec default_run_spec();

/// Unknown keys and type mismatches are Configuration errors naming every
/// offending key; the message lists all of them before anything runs.
RunSpec parse_run_spec(const std::string& json_text, const std::string& source = "<config>");
RunSpec load_run_spec(const std::string& path);

/// `key=value`; the value is read as JSON when it parses, else as a string.
void apply_override(RunSpec& spec, const std::string& assignment);

/// Nested JSON with every key, two-space indent.
std::string dump_run_spec(const RunSpec& spec);

} // namespace pspt
