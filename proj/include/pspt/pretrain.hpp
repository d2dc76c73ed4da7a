// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Next-token pretraining of the micro language model on a token corpus.

#pragma once

#include "pspt/model.hpp"

#include <cstdint>
#include <vector>

namespace pspt {

struct PretrainConfig {
    std::size_t steps = 500;
    std::size_t batch_size = 16;
    double lr = 3e-3;
    double clip_norm = 1.0;
    double held_out_fraction = 0.1;
    std::uint64_t seed = 0;
};

struct PretrainResult {
    double initial_loss = 0.0; // held-out nats per token before training
    double final_loss = 0.0;
    std::size_t train_sequences = 0;
    std::size_t held_out_sequences = 0;
};

/// Each sequence is scored as BOS + tokens + EOS (cut to max_seq_len).
/// Returns the mean negative log-likelihood per predicted token.
template <typename T>
double corpus_cross_entropy(const MicroLM<T>& model, const std::vector<TokenIds>& corpus);

/// Adam on every model parameter with a seeded held-out split and batches
/// sampled with replacement. The model is frozen again on return, also when
/// steps == 0 (in which case it is left untouched). An empty corpus is a
/// Data error.
PretrainResult pretrain_micro_lm(MicroLM<float>& model, const std::vector<TokenIds>& corpus,
                                 const PretrainConfig& config);

} // namespace pspt
