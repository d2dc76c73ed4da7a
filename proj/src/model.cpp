// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0

#include "pspt/model.hpp"

#include "pspt/error.hpp"
#include "pspt/rng.hpp"

#include <zlib.h>

#include <cmath>

namespace pspt {

std::uint32_t crc32_bytes(const void* data, std::size_t size, std::uint32_t crc) {
    const auto* bytes = static_cast<const Bytef*>(data);
    uLong state = crc;
    while (size > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
        state = ::crc32(state, bytes, chunk);
        bytes += chunk;
        size -= chunk;
    }
    return static_cast<std::uint32_t>(state);
}

void ModelConfig::validate() const {
    auto positive = [](std::size_t v, const char* name) {
        if (v == 0) fail(ErrorKind::Configuration, std::string(name) + " must be positive");
    };
    positive(vocab_size, "vocab_size");
    positive(dim, "dim");
    positive(n_layers, "n_layers");
    positive(n_heads, "n_heads");
    positive(max_seq_len, "max_seq_len");
    positive(ffn_mult, "ffn_mult");
    if (vocab_size < kNumSpecialTokens) {
        fail(ErrorKind::Configuration, "vocab_size must be at least 4 (reserved tokens)");
    }
    if (dim % n_heads != 0) {
        fail(ErrorKind::Configuration,
             "dim " + std::to_string(dim) + " is not divisible by n_heads " + std::to_string(n_heads));
    }
}

template <typename T>
MicroLM<T>::MicroLM(ModelConfig config, Vocabulary vocab) : config_(config), vocab_(std::move(vocab)) {
    if (config_.vocab_size != vocab_.size()) {
        fail(ErrorKind::Configuration, "vocab_size " + std::to_string(config_.vocab_size) +
                                           " does not match vocabulary of " + std::to_string(vocab_.size()) +
                                           " tokens");
    }
    config_.validate();
    const std::size_t d = config_.dim;
    const std::size_t ffn = d * config_.ffn_mult;
    tok_emb_ = Tensor<T>::zeros({config_.vocab_size, d});
    pos_emb_ = Tensor<T>::zeros({config_.max_seq_len, d});
    auto ones = [](std::size_t n) { return Tensor<T>::from({n}, std::vector<T>(n, T(1))); };
    for (std::size_t l = 0; l < config_.n_layers; ++l) {
        BlockWeights<T> w;
        w.ln1_gamma = ones(d);
        w.ln1_beta = Tensor<T>::zeros({d});
        w.w_qkv = Tensor<T>::zeros({d, 3 * d});
        w.b_qkv = Tensor<T>::zeros({3 * d});
        w.w_out = Tensor<T>::zeros({d, d});
        w.b_out = Tensor<T>::zeros({d});
        w.ln2_gamma = ones(d);
        w.ln2_beta = Tensor<T>::zeros({d});
        w.w_ff1 = Tensor<T>::zeros({d, ffn});
        w.b_ff1 = Tensor<T>::zeros({ffn});
        w.w_ff2 = Tensor<T>::zeros({ffn, d});
        w.b_ff2 = Tensor<T>::zeros({d});
        blocks_.push_back(std::move(w));
    }
    lnf_gamma_ = ones(d);
    lnf_beta_ = Tensor<T>::zeros({d});
}

template <typename T>
MicroLM<T> MicroLM<T>::random_init(ModelConfig config, Vocabulary vocab, std::uint64_t seed) {
    MicroLM model(config, std::move(vocab));
    Rng rng(seed);
    constexpr double kStd = 0.02;
    const double residual_std = kStd / std::sqrt(2.0 * static_cast<double>(config.n_layers));
    auto fill = [&rng](Tensor<T>& t, double std) {
        for (auto& v : t.mutable_data()) v = static_cast<T>(rng.normal() * std);
    };
    fill(model.tok_emb_, kStd);
    fill(model.pos_emb_, kStd);
    for (auto& w : model.blocks_) {
        fill(w.w_qkv, kStd);
        fill(w.w_out, residual_std);
        fill(w.w_ff1, kStd);
        fill(w.w_ff2, residual_std);
    }
    return model;
}

template <typename T>
Tensor<T> MicroLM<T>::embed(std::span<const TokenId> ids) const {
    return gather_rows(tok_emb_, ids);
}

template <typename T>
Tensor<T> MicroLM<T>::block_forward(const BlockWeights<T>& w, const Tensor<T>& h) const {
    const T eps = static_cast<T>(kLayerNormEps);
    auto a = layer_norm(h, w.ln1_gamma, w.ln1_beta, eps);
    auto qkv = add_bias(matmul(a, w.w_qkv), w.b_qkv);
    auto att = causal_attention(qkv, config_.n_heads);
    auto h1 = add(h, add_bias(matmul(att, w.w_out), w.b_out));
    auto f = layer_norm(h1, w.ln2_gamma, w.ln2_beta, eps);
    auto ff = add_bias(matmul(gelu(add_bias(matmul(f, w.w_ff1), w.b_ff1)), w.w_ff2), w.b_ff2);
    return add(h1, ff);
}

template <typename T>
Tensor<T> MicroLM<T>::hidden_states(const Tensor<T>& input_embeddings) const {
    if (input_embeddings.ndim() != 2 || input_embeddings.dim(1) != config_.dim) {
        fail(ErrorKind::Dimension, "input embeddings " + shape_str(input_embeddings.shape()) +
                                       " do not have width " + std::to_string(config_.dim));
    }
    const std::size_t len = input_embeddings.dim(0);
    if (len > config_.max_seq_len) {
        fail(ErrorKind::SequenceLength, "sequence of length " + std::to_string(len) + " exceeds max_seq_len " +
                                            std::to_string(config_.max_seq_len));
    }
    auto h = add(input_embeddings, slice_rows(pos_emb_, 0, len));
    for (const auto& w : blocks_) h = block_forward(w, h);
    return layer_norm(h, lnf_gamma_, lnf_beta_, static_cast<T>(kLayerNormEps));
}

template <typename T>
Tensor<T> MicroLM<T>::head_logprobs(const Tensor<T>& hidden) const {
    return log_softmax_rows(matmul_bt(hidden, tok_emb_));
}

template <typename T>
Tensor<T> MicroLM<T>::forward_logprobs(const Tensor<T>& input_embeddings) const {
    return head_logprobs(hidden_states(input_embeddings));
}

template <typename T>
NamedTensors<T> MicroLM<T>::named_parameters() const {
    NamedTensors<T> out;
    out.emplace_back("tok_emb", tok_emb_);
    out.emplace_back("pos_emb", pos_emb_);
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
        const auto& w = blocks_[l];
        const std::string p = "layers." + std::to_string(l) + ".";
        out.emplace_back(p + "ln1.gamma", w.ln1_gamma);
        out.emplace_back(p + "ln1.beta", w.ln1_beta);
        out.emplace_back(p + "attn.w_qkv", w.w_qkv);
        out.emplace_back(p + "attn.b_qkv", w.b_qkv);
        out.emplace_back(p + "attn.w_out", w.w_out);
        out.emplace_back(p + "attn.b_out", w.b_out);
        out.emplace_back(p + "ln2.gamma", w.ln2_gamma);
        out.emplace_back(p + "ln2.beta", w.ln2_beta);
        out.emplace_back(p + "ffn.w1", w.w_ff1);
        out.emplace_back(p + "ffn.b1", w.b_ff1);
        out.emplace_back(p + "ffn.w2", w.w_ff2);
        out.emplace_back(p + "ffn.b2", w.b_ff2);
    }
    out.emplace_back("ln_f.gamma", lnf_gamma_);
    out.emplace_back("ln_f.beta", lnf_beta_);
    return out;
}

template <typename T>
std::size_t MicroLM<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : named_parameters()) n += t.numel();
    return n;
}

template <typename T>
void MicroLM<T>::set_trainable(bool trainable) {
    for (auto& [name, t] : named_parameters()) {
        Tensor<T> handle = t;
        handle.set_requires_grad(trainable);
    }
}

template <typename T>
bool MicroLM<T>::frozen() const {
    for (const auto& [name, t] : named_parameters()) {
        if (t.requires_grad()) return false;
    }
    return true;
}

template <typename T>
std::uint32_t MicroLM<T>::checksum() const {
    std::uint32_t crc = 0;
    for (const auto& [name, t] : named_parameters()) {
        crc = crc32_bytes(t.data().data(), t.numel() * sizeof(T), crc);
    }
    return crc;
}

template class MicroLM<float>;
template class MicroLM<double>;

} // namespace pspt
