// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Trainable parameters: the soft prompt e1 and the low-rank passage adapter
// (A, B, alpha, r). Also builds the model input sequence
//   [prefix ; passage block(s) ; sep ; question]
// with the teacher-forcing target positions for the question tokens.

#pragma once

#include "pspt/model.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pspt {

inline constexpr const char* kDefaultHardPrompt = "please generate question for this passage";
inline constexpr const char* kSeparatorText = "question :";

template <typename T>
struct SoftPrompt {
    Tensor<T> e1; // [l_s x dim]
    std::string init_text;

    std::size_t length() const { return e1.dim(0); }
};

template <typename T>
struct LowRankAdapter {
    Tensor<T> A; // [|V| x r]
    Tensor<T> B; // [r x dim]
    double alpha = 16.0;

    std::size_t rank() const { return A.dim(1); }
    T scale() const { return static_cast<T>(alpha / static_cast<double>(rank())); }
};

template <typename T>
struct PsptParams {
    SoftPrompt<T> soft_prompt;
    LowRankAdapter<T> adapter;

    /// e1, A, B in that order.
    NamedTensors<T> named_parameters() const;
    std::size_t parameter_count() const;
    void set_trainable(bool trainable);
    /// Deep copy; the copy keeps the requires_grad flags.
    PsptParams clone() const;

    template <typename U>
    PsptParams<U> cast() const {
        PsptParams<U> out;
        out.soft_prompt.e1 = soft_prompt.e1.template cast<U>();
        out.soft_prompt.init_text = soft_prompt.init_text;
        out.adapter.A = adapter.A.template cast<U>();
        out.adapter.B = adapter.B.template cast<U>();
        out.adapter.alpha = adapter.alpha;
        return out;
    }
};

/// Rows are the hard prompt's token embeddings, cycled to l_s rows and
/// copied out of the model. Trainable.
template <typename T>
SoftPrompt<T> init_soft_prompt(const std::string& hard_prompt, std::size_t l_s, const MicroLM<T>& model);

/// A ~ N(0, 0.02^2) from `seed`, B = 0. Trainable.
template <typename T>
LowRankAdapter<T> init_adapter(std::size_t vocab_size, std::size_t rank, std::size_t dim, double alpha,
                               std::uint64_t seed);

template <typename T>
PsptParams<T> init_params(const MicroLM<T>& model, const std::string& hard_prompt, std::size_t l_s,
                          std::size_t rank, double alpha, std::uint64_t seed);

/// e2 = A[d] . B . (alpha / r) + E[d]
template <typename T>
Tensor<T> passage_embedding(std::span<const TokenId> passage, const PsptParams<T>& params, const MicroLM<T>& model);

template <typename T>
struct AssembledInput {
    Tensor<T> embeddings;                       // [L x dim]
    std::vector<std::size_t> target_positions;  // one per question token
    TokenIds target_ids;                        // the question
    std::size_t passage_tokens = 0;             // after truncation
};

struct AssembleOptions {
    /// [e1; e2; e4; sep; q] instead of [e1; e2; sep; q].
    bool literal_concat = false;
};

/// The passage is cut from the right when the sequence would exceed
/// max_seq_len; the question never is (SequenceLength error instead).
/// An empty question is a Contract error.
template <typename T>
AssembledInput<T> assemble_input(const PsptParams<T>& params, std::span<const TokenId> passage,
                                 std::span<const TokenId> question, const MicroLM<T>& model,
                                 const AssembleOptions& options = {});

/// Same layout with a fixed token prefix in place of e1 and the plain passage
/// embedding in place of e2. No trainable inputs.
template <typename T>
AssembledInput<T> assemble_hard_prompt_input(std::span<const TokenId> prompt, std::span<const TokenId> passage,
                                             std::span<const TokenId> question, const MicroLM<T>& model);

/// Number of trainable scalars for the closed-form fraction report.
inline std::size_t pspt_parameter_count(std::size_t l_s, std::size_t vocab_size, std::size_t rank,
                                        std::size_t dim) {
    return l_s * dim + vocab_size * rank + rank * dim;
}

} // namespace pspt
