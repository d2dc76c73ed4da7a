// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Small models and vocabularies shared by the unit tests.

#pragma once

#include "pspt/adapter.hpp"
#include "pspt/model.hpp"
#include "pspt/rng.hpp"

#include <string>
#include <vector>

namespace fixture {

inline pspt::Vocabulary vocab(std::size_t extra_words) {
    std::vector<std::string> words{"please", "generate", "question", "for", "this", "passage", ":"};
    for (std::size_t i = 0; words.size() < extra_words; ++i) words.push_back("w" + std::to_string(i));
    return pspt::Vocabulary::build({}, words.size() + pspt::kNumSpecialTokens, words);
}

template <typename T>
pspt::MicroLM<T> model(std::size_t vocab_size, std::size_t dim, std::size_t layers, std::uint64_t seed,
                       std::size_t max_len = 128) {
    auto v = vocab(vocab_size - pspt::kNumSpecialTokens);
    pspt::ModelConfig cfg{.vocab_size = v.size(), .dim = dim, .n_layers = layers, .n_heads = 4,
                          .max_seq_len = max_len, .ffn_mult = 2};
    return pspt::MicroLM<T>::random_init(cfg, v, seed);
}

/// Model whose output head is zero, so every next-token distribution is
/// uniform over the vocabulary.
inline pspt::MicroLM<float> uniform_model(std::size_t vocab_size) {
    auto m = model<float>(vocab_size, 16, 1, 1);
    for (auto& [name, t] : m.named_parameters()) {
        if (name == "ln_f.gamma") {
            pspt::Tensor<float> h = t;
            for (auto& v : h.mutable_data()) v = 0.f;
        }
    }
    return m;
}

inline pspt::TokenIds random_ids(pspt::Rng& rng, std::size_t n, std::size_t vocab_size) {
    pspt::TokenIds ids(n);
    for (auto& id : ids) id = static_cast<pspt::TokenId>(pspt::kNumSpecialTokens + rng.below(vocab_size - pspt::kNumSpecialTokens));
    return ids;
}

/// Puts non-zero values in B and perturbs e1 so every gradient path is live.
template <typename T>
void randomize(pspt::PsptParams<T>& p, pspt::Rng& rng, double scale = 0.05) {
    for (auto& v : p.adapter.B.mutable_data()) v = static_cast<T>(rng.normal() * scale);
    for (auto& v : p.adapter.A.mutable_data()) v += static_cast<T>(rng.normal() * scale);
    for (auto& v : p.soft_prompt.e1.mutable_data()) v += static_cast<T>(rng.normal() * scale);
}

} // namespace fixture
