// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0

#include "pspt/pretrain.hpp"

#include "pspt/error.hpp"
#include "pspt/log.hpp"
#include "pspt/rng.hpp"

#include <cmath>

namespace pspt {

namespace {

struct Example {
    TokenIds input;
    TokenIds target;
};

Example make_example(const TokenIds& seq, std::size_t max_len) {
    Example ex;
    ex.input.push_back(kBosId);
    ex.input.insert(ex.input.end(), seq.begin(), seq.end());
    ex.target.assign(seq.begin(), seq.end());
    ex.target.push_back(kEosId);
    if (ex.input.size() > max_len) {
        ex.input.resize(max_len);
        ex.target.resize(max_len);
    }
    return ex;
}

// Summed NLL of one sequence, as a graph.
template <typename T>
Tensor<T> sequence_nll(const MicroLM<T>& model, const Example& ex) {
    auto logp = model.forward_logprobs(model.embed(ex.input));
    std::vector<std::size_t> rows(ex.target.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return scale(sum(pick(logp, std::span<const std::size_t>(rows), std::span<const TokenId>(ex.target))), T(-1));
}

} // namespace

template <typename T>
double corpus_cross_entropy(const MicroLM<T>& model, const std::vector<TokenIds>& corpus) {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& seq : corpus) {
        const Example ex = make_example(seq, model.config().max_seq_len);
        total += static_cast<double>(sequence_nll(model, ex).item());
        count += ex.target.size();
    }
    return count ? total / static_cast<double>(count) : 0.0;
}

PretrainResult pretrain_micro_lm(MicroLM<float>& model, const std::vector<TokenIds>& corpus,
                                 const PretrainConfig& config) {
    if (corpus.empty()) fail(ErrorKind::Data, "pretraining corpus is empty");
    if (config.batch_size == 0) fail(ErrorKind::Configuration, "pretrain batch_size must be positive");
    if (!(config.lr > 0.0)) fail(ErrorKind::Configuration, "pretrain lr must be positive");
    if (!(config.held_out_fraction >= 0.0 && config.held_out_fraction < 1.0)) {
        fail(ErrorKind::Configuration, "held_out_fraction must be in [0, 1)");
    }
    const std::size_t vs = model.config().vocab_size;
    for (const auto& seq : corpus) {
        for (TokenId id : seq) {
            if (id < 0 || static_cast<std::size_t>(id) >= vs) {
                fail(ErrorKind::Vocabulary, "corpus token id " + std::to_string(id) + " outside vocabulary");
            }
        }
    }

    Rng rng(config.seed);
    std::vector<std::size_t> order(corpus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    std::size_t n_held = static_cast<std::size_t>(std::floor(config.held_out_fraction * corpus.size()));
    if (n_held == 0 && corpus.size() >= 2 && config.held_out_fraction > 0.0) n_held = 1;
    std::vector<TokenIds> held, train;
    for (std::size_t i = 0; i < order.size(); ++i) (i < n_held ? held : train).push_back(corpus[order[i]]);
    if (held.empty()) held = train;

    PretrainResult result;
    result.train_sequences = train.size();
    result.held_out_sequences = held.size();
    model.set_trainable(false);
    result.initial_loss = corpus_cross_entropy(model, held);
    if (config.steps == 0) {
        result.final_loss = result.initial_loss;
        return result;
    }

    model.set_trainable(true);
    auto params = model.named_parameters();
    std::vector<std::vector<float>> m(params.size()), v(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i].assign(params[i].second.numel(), 0.f);
        v[i].assign(params[i].second.numel(), 0.f);
    }
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const std::size_t max_len = model.config().max_seq_len;
    for (std::size_t step = 0; step < config.steps; ++step) {
        Tensor<float> total;
        std::size_t tokens = 0;
        for (std::size_t b = 0; b < config.batch_size; ++b) {
            const Example ex = make_example(train[rng.below(train.size())], max_len);
            auto nll = sequence_nll(model, ex);
            tokens += ex.target.size();
            total = total.defined() ? add(total, nll) : nll;
        }
        auto loss = scale(total, 1.f / static_cast<float>(tokens));
        const double value = static_cast<double>(loss.item());
        if (!std::isfinite(value)) {
            model.set_trainable(false);
            fail(ErrorKind::Numeric, "non-finite pretraining loss at step " + std::to_string(step));
        }
        for (auto& [name, t] : params) t.zero_grad();
        backward(loss);
        double norm2 = 0.0;
        for (auto& [name, t] : params) {
            for (float g : t.grad()) norm2 += static_cast<double>(g) * g;
        }
        const double norm = std::sqrt(norm2);
        const double clip = norm > config.clip_norm ? config.clip_norm / norm : 1.0;
        const double t1 = static_cast<double>(step + 1);
        const double bc1 = 1.0 - std::pow(b1, t1), bc2 = 1.0 - std::pow(b2, t1);
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto values = params[i].second.mutable_data();
            auto grad = params[i].second.grad();
            for (std::size_t k = 0; k < values.size(); ++k) {
                const double g = static_cast<double>(grad[k]) * clip;
                m[i][k] = static_cast<float>(b1 * m[i][k] + (1.0 - b1) * g);
                v[i][k] = static_cast<float>(b2 * v[i][k] + (1.0 - b2) * g * g);
                const double upd = config.lr * (m[i][k] / bc1) / (std::sqrt(v[i][k] / bc2) + eps);
                values[k] = static_cast<float>(values[k] - upd);
            }
        }
        if ((step + 1) % 500 == 0 || step + 1 == config.steps) {
            log_info("pretrain step " + std::to_string(step + 1) + "/" + std::to_string(config.steps) +
                     " loss " + std::to_string(value));
        }
    }
    model.set_trainable(false);
    result.final_loss = corpus_cross_entropy(model, held);
    return result;
}

template double corpus_cross_entropy(const MicroLM<float>&, const std::vector<TokenIds>&);
template double corpus_cross_entropy(const MicroLM<double>&, const std::vector<TokenIds>&);

} // namespace pspt
