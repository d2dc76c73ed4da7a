// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Micro decoder-only causal language model: learned token and absolute
// position embeddings, pre-norm transformer blocks, final layer norm and an
// output head tied to the token embedding table.

#pragma once

#include "pspt/tensor.hpp"
#include "pspt/vocab.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pspt {

struct ModelConfig {
    std::size_t vocab_size = 0;
    std::size_t dim = 64;
    std::size_t n_layers = 2;
    std::size_t n_heads = 4;
    std::size_t max_seq_len = 256;
    std::size_t ffn_mult = 4;

    /// Throws Configuration naming the first offending field.
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct BlockWeights {
    Tensor<T> ln1_gamma, ln1_beta;
    Tensor<T> w_qkv, b_qkv; // [dim x 3dim], [3dim]
    Tensor<T> w_out, b_out; // [dim x dim], [dim]
    Tensor<T> ln2_gamma, ln2_beta;
    Tensor<T> w_ff1, b_ff1; // [dim x ffn], [ffn]
    Tensor<T> w_ff2, b_ff2; // [ffn x dim], [dim]
};

template <typename T>
using NamedTensors = std::vector<std::pair<std::string, Tensor<T>>>;

template <typename T>
class MicroLM {
public:
    static constexpr double kLayerNormEps = 1e-5;

    /// All buffers zero-filled; use random_init or load a checkpoint.
    MicroLM(ModelConfig config, Vocabulary vocab);

    /// Gaussian(0, 0.02) weights (residual projections scaled by
    /// 1/sqrt(2 n_layers)), zero biases, unit layer-norm gains. Frozen.
    static MicroLM random_init(ModelConfig config, Vocabulary vocab, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }
    const Vocabulary& vocab() const { return vocab_; }
    const Tensor<T>& token_embedding() const { return tok_emb_; }

    /// Rows of the embedding table; throws Vocabulary for ids >= |V|.
    Tensor<T> embed(std::span<const TokenId> ids) const;

    /// Final-norm hidden states [L x dim] for input embeddings [L x dim].
    /// Throws SequenceLength when L > max_seq_len.
    Tensor<T> hidden_states(const Tensor<T>& input_embeddings) const;

    /// log_softmax(hidden . E^T) row by row.
    Tensor<T> head_logprobs(const Tensor<T>& hidden) const;

    /// Row t is the log-distribution of the token following position t.
    Tensor<T> forward_logprobs(const Tensor<T>& input_embeddings) const;

    /// Stable order, used by checkpoints, checksums and optimizers.
    NamedTensors<T> named_parameters() const;
    std::size_t parameter_count() const;

    /// Toggles requires_grad on every parameter. Models are frozen unless a
    /// pretraining run explicitly unfreezes them.
    void set_trainable(bool trainable);
    bool frozen() const;

    /// CRC-32 over every parameter buffer, in named_parameters order.
    std::uint32_t checksum() const;

    template <typename U>
    MicroLM<U> cast() const {
        MicroLM<U> out(config_, vocab_);
        auto src = named_parameters();
        auto dst = out.named_parameters();
        for (std::size_t i = 0; i < src.size(); ++i) {
            auto values = dst[i].second.mutable_data();
            auto from = src[i].second.data();
            for (std::size_t j = 0; j < values.size(); ++j) values[j] = static_cast<U>(from[j]);
        }
        return out;
    }

private:
    Tensor<T> block_forward(const BlockWeights<T>& w, const Tensor<T>& h) const;

    ModelConfig config_;
    Vocabulary vocab_;
    Tensor<T> tok_emb_; // [V x dim], also the output head
    Tensor<T> pos_emb_; // [max_seq_len x dim]
    std::vector<BlockWeights<T>> blocks_;
    Tensor<T> lnf_gamma_, lnf_beta_;
};

/// CRC-32 of raw bytes, continuing from `crc`.
std::uint32_t crc32_bytes(const void* data, std::size_t size, std::uint32_t crc = 0);

} // namespace pspt
