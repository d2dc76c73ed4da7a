// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Losses and the optimization loop for the soft prompt and adapter.

#pragma once

#include "pspt/adapter.hpp"
#include "pspt/dataset.hpp"
#include "pspt/scoring.hpp"

#include <string>
#include <vector>

namespace pspt {

struct TrainingInstance {
    std::string question_id;
    TokenIds question;
    std::string positive_id;
    TokenIds positive;
    std::string negative_id;
    TokenIds negative;
};

/// One (q, d+, d-) triple after in-batch expansion. Indices point into the
/// batch: `query` owns q and d+, the negative is either another instance's
/// positive or some instance's own negative.
struct TrainPair {
    std::size_t query = 0;
    std::size_t source = 0;
    bool source_positive = false;
};

struct TrainConfig {
    std::size_t batch_size = 4;
    std::size_t in_batch_negatives = 4;
    std::size_t epochs = 20;
    double lr_soft_prompt = 3e-2;
    double lr_adapter = 3e-5;
    std::size_t early_stop_patience = 3;
    std::uint64_t seed = 0;
    std::size_t train_sample_size = 320;
    double dev_fraction = 0.1;
    double clip_norm = 1.0;
    double weight_point = 1.0;
    double weight_pair = 1.0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    bool literal_concat = false;

    /// Throws Configuration naming the first invalid field.
    void validate() const;
};

/// One instance per sampled question: a seeded draw of `sample_size`
/// questions without replacement among those with at least one relevant and
/// one non-relevant passage, each paired with a random positive and a random
/// negative. Ineligible questions are skipped with a logged warning.
std::vector<TrainingInstance> build_instances(const QaDataset& dataset, const Vocabulary& vocab,
                                              std::uint64_t seed, std::size_t sample_size);

/// Every instance keeps its own negative, then takes extra negatives round
/// robin from the other instances: their positives first, then their
/// negatives, skipping passages equal to its own positive or already used,
/// until it has `m` negatives or runs out. Grouped by query.
std::vector<TrainPair> expand_in_batch(const std::vector<TrainingInstance>& batch, std::size_t m);

template <typename T>
Tensor<T> loss_point(std::span<const TokenId> q, std::span<const TokenId> pos, const PsptParams<T>& params,
                     const MicroLM<T>& model, const AssembleOptions& options = {});

template <typename T>
Tensor<T> loss_pair(std::span<const TokenId> q, std::span<const TokenId> pos, std::span<const TokenId> neg,
                    const PsptParams<T>& params, const MicroLM<T>& model, const AssembleOptions& options = {});

template <typename T>
Tensor<T> loss_total(std::span<const TokenId> q, std::span<const TokenId> pos, std::span<const TokenId> neg,
                     const PsptParams<T>& params, const MicroLM<T>& model, const AssembleOptions& options = {},
                     double weight_point = 1.0, double weight_pair = 1.0);

/// Hinge and combination on already computed log-likelihoods.
template <typename T>
Tensor<T> pair_hinge(const Tensor<T>& loglik_pos, const Tensor<T>& loglik_neg);

struct TrainResult {
    std::vector<std::string> log;  // JSON lines
    std::size_t steps = 0;
    std::size_t best_epoch = 0;    // 0 = the initial parameters
    double initial_dev_loss = 0.0;
    double best_dev_loss = 0.0;
    std::uint32_t model_checksum_before = 0;
    std::uint32_t model_checksum_after = 0;
};

/// Adam on e1 (lr_soft_prompt) and A, B (lr_adapter), linear decay to zero
/// over all steps, global gradient clipping, mean loss over the expanded
/// pairs of each step. A seeded dev split drives early stopping and the
/// parameters with the best dev loss are written back into `params`.
template <typename T>
TrainResult train(const TrainConfig& config, const std::vector<TrainingInstance>& instances,
                  const MicroLM<T>& model, PsptParams<T>& params);

/// Mean loss_total over instances (own negative only).
template <typename T>
double mean_instance_loss(const std::vector<TrainingInstance>& instances, const MicroLM<T>& model,
                          const PsptParams<T>& params, const TrainConfig& config);

} // namespace pspt
