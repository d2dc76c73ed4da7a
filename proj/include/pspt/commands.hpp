// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Workflows behind the command-line tool. Each one reads the files named in
// the spec, writes its artifacts and returns the text meant for stdout.

#pragma once

#include "pspt/config.hpp"

#include <string>

namespace pspt {

/// Writes paths.dataset, paths.eval_dataset and (if set) paths.pretrain_corpus.
std::string cmd_synth(const RunSpec& spec);

/// Vocabulary from the datasets and corpus, seeded init, optional
/// pretraining, checkpoint at paths.model. Reports Φ, θ and the θ fraction.
std::string cmd_init_model(const RunSpec& spec);

/// paths.base_model -> pretrain.steps on paths.pretrain_corpus -> paths.model.
std::string cmd_pretrain(const RunSpec& spec);

/// Fresh θ on the frozen paths.model, trained on paths.dataset; best θ to
/// paths.params and the log to paths.train_log.
std::string cmd_train(const RunSpec& spec);

/// BM25 over paths.eval_dataset -> paths.run_in.
std::string cmd_retrieve(const RunSpec& spec);

/// Rescores paths.run_in with rerank.scorer -> paths.run_out.
std::string cmd_rerank(const RunSpec& spec);

/// Metrics of paths.runs on paths.eval_dataset; JSON to paths.report.
std::string cmd_eval(const RunSpec& spec);

/// Closed-form θ size: l_s*dim + |V|*r + r*dim.
std::size_t theta_parameter_count(std::size_t l_s, std::size_t vocab_size, std::size_t r, std::size_t dim);

} // namespace pspt
