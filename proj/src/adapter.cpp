// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0

#include "pspt/adapter.hpp"

#include "pspt/error.hpp"
#include "pspt/rng.hpp"

namespace pspt {

namespace {

constexpr double kAdapterInitStd = 0.02;

// Longest passage prefix that fits next to `fixed` other rows when each
// passage token occupies `rows_per_token` rows.
std::size_t fit_passage(std::size_t fixed, std::size_t rows_per_token, std::size_t passage_len,
                        std::size_t question_len, std::size_t max_len) {
    if (fixed > max_len) {
        fail(ErrorKind::SequenceLength, "prompt, separator and question need " + std::to_string(fixed) +
                                            " positions (question of " + std::to_string(question_len) +
                                            " tokens) but max_seq_len is " + std::to_string(max_len));
    }
    return std::min(passage_len, (max_len - fixed) / rows_per_token);
}

template <typename T>
AssembledInput<T> finish(std::vector<Tensor<T>> parts, std::span<const TokenId> question,
                         const MicroLM<T>& model, std::size_t passage_tokens) {
    const TokenIds sep = model.vocab().tokenize(kSeparatorText);
    parts.push_back(model.embed(sep));
    parts.push_back(model.embed(question));
    AssembledInput<T> out;
    out.embeddings = concat_rows(parts);
    out.passage_tokens = passage_tokens;
    const std::size_t first_q = out.embeddings.dim(0) - question.size();
    for (std::size_t i = 0; i < question.size(); ++i) out.target_positions.push_back(first_q + i - 1);
    out.target_ids.assign(question.begin(), question.end());
    return out;
}

void require_question(std::span<const TokenId> question) {
    if (question.empty()) fail(ErrorKind::Contract, "question is empty; its likelihood is undefined");
}

} // namespace

template <typename T>
NamedTensors<T> PsptParams<T>::named_parameters() const {
    return {{"pspt.e1", soft_prompt.e1}, {"pspt.A", adapter.A}, {"pspt.B", adapter.B}};
}

template <typename T>
std::size_t PsptParams<T>::parameter_count() const {
    return soft_prompt.e1.numel() + adapter.A.numel() + adapter.B.numel();
}

template <typename T>
void PsptParams<T>::set_trainable(bool trainable) {
    soft_prompt.e1.set_requires_grad(trainable);
    adapter.A.set_requires_grad(trainable);
    adapter.B.set_requires_grad(trainable);
}

template <typename T>
PsptParams<T> PsptParams<T>::clone() const {
    PsptParams out;
    auto copy = [](const Tensor<T>& t) {
        return Tensor<T>::from(t.shape(), std::vector<T>(t.data().begin(), t.data().end()), t.requires_grad());
    };
    out.soft_prompt.e1 = copy(soft_prompt.e1);
    out.soft_prompt.init_text = soft_prompt.init_text;
    out.adapter.A = copy(adapter.A);
    out.adapter.B = copy(adapter.B);
    out.adapter.alpha = adapter.alpha;
    return out;
}

template <typename T>
SoftPrompt<T> init_soft_prompt(const std::string& hard_prompt, std::size_t l_s, const MicroLM<T>& model) {
    const TokenIds ids = model.vocab().tokenize(hard_prompt);
    if (ids.empty()) fail(ErrorKind::Configuration, "hard prompt '" + hard_prompt + "' has no tokens");
    if (l_s == 0) fail(ErrorKind::Configuration, "soft prompt length l_s must be at least 1");
    TokenIds cycled(l_s);
    for (std::size_t i = 0; i < l_s; ++i) cycled[i] = ids[i % ids.size()];
    SoftPrompt<T> sp;
    sp.e1 = model.embed(cycled).detach(); // a fresh buffer, never aliasing E
    sp.e1.set_requires_grad(true);
    sp.init_text = hard_prompt;
    return sp;
}

template <typename T>
LowRankAdapter<T> init_adapter(std::size_t vocab_size, std::size_t rank, std::size_t dim, double alpha,
                               std::uint64_t seed) {
    if (rank == 0) fail(ErrorKind::Configuration, "adapter rank r must be at least 1");
    if (rank > dim) {
        fail(ErrorKind::Configuration,
             "adapter rank r=" + std::to_string(rank) + " exceeds embedding width " + std::to_string(dim));
    }
    if (!(alpha > 0.0)) fail(ErrorKind::Configuration, "adapter alpha must be positive");
    Rng rng(seed);
    std::vector<T> a(vocab_size * rank);
    for (auto& v : a) v = static_cast<T>(rng.normal() * kAdapterInitStd);
    LowRankAdapter<T> ad;
    ad.A = Tensor<T>::from({vocab_size, rank}, std::move(a), true);
    ad.B = Tensor<T>::zeros({rank, dim}, true);
    ad.alpha = alpha;
    return ad;
}

template <typename T>
PsptParams<T> init_params(const MicroLM<T>& model, const std::string& hard_prompt, std::size_t l_s,
                          std::size_t rank, double alpha, std::uint64_t seed) {
    PsptParams<T> p;
    p.soft_prompt = init_soft_prompt(hard_prompt, l_s, model);
    p.adapter = init_adapter<T>(model.config().vocab_size, rank, model.config().dim, alpha, seed);
    return p;
}

template <typename T>
Tensor<T> passage_embedding(std::span<const TokenId> passage, const PsptParams<T>& params,
                            const MicroLM<T>& model) {
    const auto& ad = params.adapter;
    if (ad.A.dim(0) != model.config().vocab_size || ad.B.dim(1) != model.config().dim) {
        fail(ErrorKind::Dimension, "adapter " + shape_str(ad.A.shape()) + "." + shape_str(ad.B.shape()) +
                                       " does not fit model with |V|=" +
                                       std::to_string(model.config().vocab_size) +
                                       ", dim=" + std::to_string(model.config().dim));
    }
    auto e4 = model.embed(passage);
    auto e3 = matmul(gather_rows(ad.A, passage), ad.B);
    return add(scale(e3, ad.scale()), e4);
}

template <typename T>
AssembledInput<T> assemble_input(const PsptParams<T>& params, std::span<const TokenId> passage,
                                 std::span<const TokenId> question, const MicroLM<T>& model,
                                 const AssembleOptions& options) {
    require_question(question);
    const auto& e1 = params.soft_prompt.e1;
    if (e1.ndim() != 2 || e1.dim(1) != model.config().dim) {
        fail(ErrorKind::Dimension, "soft prompt " + shape_str(e1.shape()) + " does not have width " +
                                       std::to_string(model.config().dim));
    }
    const std::size_t sep = model.vocab().tokenize(kSeparatorText).size();
    const std::size_t per_token = options.literal_concat ? 2 : 1;
    const std::size_t keep = fit_passage(e1.dim(0) + sep + question.size(), per_token, passage.size(),
                                         question.size(), model.config().max_seq_len);
    const auto d = passage.first(keep);
    std::vector<Tensor<T>> parts{e1, passage_embedding(d, params, model)};
    if (options.literal_concat) parts.push_back(model.embed(d));
    return finish(std::move(parts), question, model, keep);
}

template <typename T>
AssembledInput<T> assemble_hard_prompt_input(std::span<const TokenId> prompt, std::span<const TokenId> passage,
                                             std::span<const TokenId> question, const MicroLM<T>& model) {
    require_question(question);
    const std::size_t sep = model.vocab().tokenize(kSeparatorText).size();
    const std::size_t keep = fit_passage(prompt.size() + sep + question.size(), 1, passage.size(),
                                         question.size(), model.config().max_seq_len);
    std::vector<Tensor<T>> parts{model.embed(prompt), model.embed(passage.first(keep))};
    return finish(std::move(parts), question, model, keep);
}

#define PSPT_INSTANTIATE(T)                                                                                      \
    template struct PsptParams<T>;                                                                               \
    template SoftPrompt<T> init_soft_prompt(const std::string&, std::size_t, const MicroLM<T>&);                 \
    template LowRankAdapter<T> init_adapter<T>(std::size_t, std::size_t, std::size_t, double, std::uint64_t);    \
    template PsptParams<T> init_params(const MicroLM<T>&, const std::string&, std::size_t, std::size_t, double,  \
                                       std::uint64_t);                                                           \
    template Tensor<T> passage_embedding(std::span<const TokenId>, const PsptParams<T>&, const MicroLM<T>&);     \
    template AssembledInput<T> assemble_input(const PsptParams<T>&, std::span<const TokenId>,                    \
                                              std::span<const TokenId>, const MicroLM<T>&,                       \
                                              const AssembleOptions&);                                           \
    template AssembledInput<T> assemble_hard_prompt_input(std::span<const TokenId>, std::span<const TokenId>,    \
                                                          std::span<const TokenId>, const MicroLM<T>&);

PSPT_INSTANTIATE(float)
PSPT_INSTANTIATE(double)

} // namespace pspt
