// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0

#include "pspt/scoring.hpp"

#include "pspt/error.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

namespace pspt {

ScoreMode parse_score_mode(const std::string& name) {
    if (name == "sum") return ScoreMode::Sum;
    if (name == "mean") return ScoreMode::Mean;
    fail(ErrorKind::Configuration, "score_mode must be 'sum' or 'mean', got '" + name + "'");
}

const char* score_mode_name(ScoreMode mode) noexcept { return mode == ScoreMode::Sum ? "sum" : "mean"; }

template <typename T>
Tensor<T> question_loglik(const AssembledInput<T>& input, const MicroLM<T>& model) {
    auto hidden = model.hidden_states(input.embeddings);
    auto rows = select_rows(hidden, std::span<const std::size_t>(input.target_positions));
    auto logp = model.head_logprobs(rows);
    std::vector<std::size_t> idx(input.target_ids.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return sum(pick(logp, std::span<const std::size_t>(idx), std::span<const TokenId>(input.target_ids)));
}

template <typename T>
Tensor<T> pspt_loglik(std::span<const TokenId> question, std::span<const TokenId> passage,
                      const PsptParams<T>& params, const MicroLM<T>& model, const AssembleOptions& options) {
    return question_loglik(assemble_input(params, passage, question, model, options), model);
}

namespace {

Score finish_score(double total, std::size_t q_len, ScoreMode mode) {
    if (mode == ScoreMode::Mean) total /= static_cast<double>(q_len);
    return Score{total, mode};
}

} // namespace

template <typename T>
Score score_pspt(std::span<const TokenId> question, std::span<const TokenId> passage, const PsptParams<T>& params,
                 const MicroLM<T>& model, ScoreMode mode, const AssembleOptions& options) {
    auto ll = pspt_loglik(question, passage, params, model, options);
    return finish_score(static_cast<double>(ll.item()), question.size(), mode);
}

template <typename T>
Score score_upr(std::span<const TokenId> question, std::span<const TokenId> passage, const MicroLM<T>& model,
                const std::string& prompt_text, ScoreMode mode) {
    const TokenIds prompt = model.vocab().tokenize(prompt_text);
    if (prompt.empty()) fail(ErrorKind::Configuration, "UPR prompt '" + prompt_text + "' has no tokens");
    auto input = assemble_hard_prompt_input<T>(prompt, passage, question, model);
    return finish_score(static_cast<double>(question_loglik(input, model).item()), question.size(), mode);
}

std::string upr_inst_prompt(const std::string& hard_prompt, const std::string& example_passage,
                            const std::string& example_question) {
    return hard_prompt + " based on the example : example : passage : " + example_passage +
           " question : " + example_question + " passage :";
}

std::vector<Candidate> rerank(std::vector<Candidate> candidates, const CandidateScorer& scorer, std::size_t workers) {
    if (candidates.empty()) fail(ErrorKind::Contract, "rerank: empty candidate list");
    std::set<std::string> ids;
    for (const auto& c : candidates) {
        if (!ids.insert(c.passage_id).second) {
            fail(ErrorKind::Input, "duplicate passage id '" + c.passage_id + "' in candidate list");
        }
    }
    workers = std::clamp<std::size_t>(workers, 1, candidates.size());
    if (workers == 1) {
        for (auto& c : candidates) c.score = scorer(c);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr first_error;
        std::mutex error_mutex;
        auto work = [&] {
            for (std::size_t i = next++; i < candidates.size(); i = next++) {
                try {
                    candidates[i].score = scorer(candidates[i]);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        };
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }
    std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.retriever_rank < b.retriever_rank;
    });
    return candidates;
}

#define PSPT_INSTANTIATE(T)                                                                                     \
    template Tensor<T> question_loglik(const AssembledInput<T>&, const MicroLM<T>&);                            \
    template Tensor<T> pspt_loglik(std::span<const TokenId>, std::span<const TokenId>, const PsptParams<T>&,    \
                                   const MicroLM<T>&, const AssembleOptions&);                                  \
    template Score score_pspt(std::span<const TokenId>, std::span<const TokenId>, const PsptParams<T>&,         \
                              const MicroLM<T>&, ScoreMode, const AssembleOptions&);                            \
    template Score score_upr(std::span<const TokenId>, std::span<const TokenId>, const MicroLM<T>&,             \
                             const std::string&, ScoreMode);

PSPT_INSTANTIATE(float)
PSPT_INSTANTIATE(double)

} // namespace pspt
