// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Question log-likelihood scoring (PSPT, UPR, UPR-Inst) and reranking.

#pragma once

#include "pspt/adapter.hpp"

#include <functional>
#include <string>
#include <vector>

namespace pspt {

enum class ScoreMode { Sum, Mean };

ScoreMode parse_score_mode(const std::string& name);
const char* score_mode_name(ScoreMode mode) noexcept;

struct Score {
    double value = 0.0;
    ScoreMode mode = ScoreMode::Sum;
};

/// Sum of log P(q_l | prefix) over the input's target positions, as a
/// differentiable scalar. Only the target rows go through the output head.
template <typename T>
Tensor<T> question_loglik(const AssembledInput<T>& input, const MicroLM<T>& model);

/// Differentiable sum-mode PSPT score, the building block of the losses.
template <typename T>
Tensor<T> pspt_loglik(std::span<const TokenId> question, std::span<const TokenId> passage,
                      const PsptParams<T>& params, const MicroLM<T>& model, const AssembleOptions& options = {});

template <typename T>
Score score_pspt(std::span<const TokenId> question, std::span<const TokenId> passage, const PsptParams<T>& params,
                 const MicroLM<T>& model, ScoreMode mode = ScoreMode::Sum, const AssembleOptions& options = {});

/// Hard-prompt baseline: [tok(prompt_text) ; E[d] ; sep ; q].
template <typename T>
Score score_upr(std::span<const TokenId> question, std::span<const TokenId> passage, const MicroLM<T>& model,
                const std::string& prompt_text, ScoreMode mode = ScoreMode::Sum);

/// Prompt text for the in-context baseline: the hard prompt, then one worked
/// passage/question example, then the "passage :" lead-in for the candidate.
std::string upr_inst_prompt(const std::string& hard_prompt, const std::string& example_passage,
                            const std::string& example_question);

struct Candidate {
    std::string passage_id;
    std::string text;
    std::size_t retriever_rank = 0; // 1-based
    double retriever_score = 0.0;
    double score = 0.0;             // filled by rerank
};

using CandidateScorer = std::function<double(const Candidate&)>;

/// Scores every candidate once (on up to `workers` threads) and sorts by
/// score descending, ties by ascending retriever rank. The order never
/// depends on the worker count. Duplicate passage ids are an Input error.
std::vector<Candidate> rerank(std::vector<Candidate> candidates, const CandidateScorer& scorer,
                              std::size_t workers = 1);

} // namespace pspt
