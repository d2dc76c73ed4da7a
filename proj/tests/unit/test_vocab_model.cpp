// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include "pspt/error.hpp"
#include "pspt/model.hpp"
#include "pspt/rng.hpp"

#include <cmath>
#include <map>

using namespace pspt;

namespace {

Vocabulary letters(std::size_t n) {
    std::vector<std::string> words;
    for (std::size_t i = 0; i < n; ++i) words.push_back("w" + std::to_string(i));
    return Vocabulary::build({}, n + kNumSpecialTokens, words);
}

// Straight-line double-precision forward pass, written independently of the
// autodiff ops.
std::vector<std::vector<double>> reference_forward(const MicroLM<double>& m, const std::vector<std::vector<double>>& x) {
    const auto& cfg = m.config();
    const std::size_t L = x.size(), d = cfg.dim, H = cfg.n_heads, hd = d / H;
    std::map<std::string, std::vector<double>> p;
    for (const auto& [name, t] : m.named_parameters()) p[name] = {t.data().begin(), t.data().end()};
    auto ln = [&](const std::vector<double>& v, const std::string& pre) {
        double mu = 0, var = 0;
        for (double a : v) mu += a;
        mu /= d;
        for (double a : v) var += (a - mu) * (a - mu);
        var /= d;
        std::vector<double> o(d);
        for (std::size_t j = 0; j < d; ++j)
            o[j] = (v[j] - mu) / std::sqrt(var + 1e-5) * p[pre + ".gamma"][j] + p[pre + ".beta"][j];
        return o;
    };
    auto lin = [&](const std::vector<double>& v, const std::string& w, const std::string& b, std::size_t out) {
        std::vector<double> o(out);
        for (std::size_t j = 0; j < out; ++j) {
            double s = p[b][j];
            for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * p[w][i * out + j];
            o[j] = s;
        }
        return o;
    };
    std::vector<std::vector<double>> h(L, std::vector<double>(d));
    for (std::size_t t = 0; t < L; ++t)
        for (std::size_t j = 0; j < d; ++j) h[t][j] = x[t][j] + p["pos_emb"][t * d + j];
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const std::string pre = "layers." + std::to_string(l) + ".";
        std::vector<std::vector<double>> qkv(L);
        for (std::size_t t = 0; t < L; ++t) qkv[t] = lin(ln(h[t], pre + "ln1"), pre + "attn.w_qkv", pre + "attn.b_qkv", 3 * d);
        for (std::size_t t = 0; t < L; ++t) {
            std::vector<double> att(d, 0.0);
            for (std::size_t hh = 0; hh < H; ++hh) {
                std::vector<double> s(t + 1);
                double mx = -1e300;
                for (std::size_t u = 0; u <= t; ++u) {
                    double dot = 0;
                    for (std::size_t k = 0; k < hd; ++k) dot += qkv[t][hh * hd + k] * qkv[u][d + hh * hd + k];
                    s[u] = dot / std::sqrt(double(hd));
                    mx = std::max(mx, s[u]);
                }
                double z = 0;
                for (auto& v : s) z += (v = std::exp(v - mx));
                for (std::size_t u = 0; u <= t; ++u)
                    for (std::size_t k = 0; k < hd; ++k) att[hh * hd + k] += s[u] / z * qkv[u][2 * d + hh * hd + k];
            }
            auto proj = lin(att, pre + "attn.w_out", pre + "attn.b_out", d);
            for (std::size_t j = 0; j < d; ++j) qkv[t][j] = proj[j]; // reuse as scratch after the step
        }
        for (std::size_t t = 0; t < L; ++t)
            for (std::size_t j = 0; j < d; ++j) h[t][j] += qkv[t][j];
        for (std::size_t t = 0; t < L; ++t) {
            auto f = lin(ln(h[t], pre + "ln2"), pre + "ffn.w1", pre + "ffn.b1", d * cfg.ffn_mult);
            for (auto& v : f) v = 0.5 * v * (1 + std::tanh(std::sqrt(2 / M_PI) * (v + 0.044715 * v * v * v)));
            auto o = lin(f, pre + "ffn.w2", pre + "ffn.b2", d);
            for (std::size_t j = 0; j < d; ++j) h[t][j] += o[j];
        }
    }
    std::vector<std::vector<double>> out(L, std::vector<double>(cfg.vocab_size));
    for (std::size_t t = 0; t < L; ++t) {
        auto f = ln(h[t], "ln_f");
        double mx = -1e300;
        for (std::size_t v = 0; v < cfg.vocab_size; ++v) {
            double s = 0;
            for (std::size_t j = 0; j < d; ++j) s += f[j] * p["tok_emb"][v * d + j];
            out[t][v] = s;
            mx = std::max(mx, s);
        }
        double z = 0;
        for (double s : out[t]) z += std::exp(s - mx);
        for (auto& s : out[t]) s = s - mx - std::log(z);
    }
    return out;
}

} // namespace

TEST_CASE("tokenize") {
    auto vocab = Vocabulary::build({"the cat sat .", "question : who ?"}, 100);
    CHECK(vocab.tokenize("").empty());
    auto ids = vocab.tokenize("The cat sat.");
    REQUIRE(ids.size() == 4);
    CHECK(ids[0] == vocab.id("the"));
    CHECK(ids[1] == vocab.id("cat"));
    CHECK(ids[2] == vocab.id("sat"));
    CHECK(ids[3] == vocab.id("."));
    CHECK(vocab.tokenize("zzzunknownzzz") == TokenIds{kUnkId});
    CHECK(vocab.token(kPadId) == "<pad>");
    CHECK(vocab.detokenize(vocab.tokenize("Question: who?")) == "question : who ?");
}

TEST_CASE("vocabulary ordering and validation") {
    auto v = Vocabulary::build({"b a b c", "c b"}, 6, {"zz"});
    CHECK(v.tokens() == std::vector<std::string>{"<pad>", "<unk>", "<bos>", "<eos>", "zz", "b"});
    CHECK_THROWS_AS(Vocabulary::build({}, 3), Error);
    CHECK_THROWS_AS(Vocabulary::from_tokens({"<pad>", "<unk>"}), Error);
    CHECK_THROWS_AS(Vocabulary::from_tokens({"<pad>", "<unk>", "<bos>", "<eos>", "a", "a"}), Error);
    try {
        v.token(99);
        FAIL("expected vocabulary error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Vocabulary);
    }
}

TEST_CASE("config validation") {
    ModelConfig c;
    c.vocab_size = 10;
    c.dim = 30;
    c.n_heads = 4;
    CHECK_THROWS_AS(c.validate(), Error);
    c.dim = 32;
    c.validate();
    c.vocab_size = 3;
    CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("embed") {
    ModelConfig cfg{.vocab_size = 12, .dim = 8, .n_layers = 1, .n_heads = 2, .max_seq_len = 16, .ffn_mult = 2};
    auto m = MicroLM<float>::random_init(cfg, letters(8), 1);
    CHECK(m.embed({}).shape() == Shape{0, 8});
    std::vector<TokenId> ids{5, 5, 2};
    auto e = m.embed(ids);
    CHECK_FALSE(e.requires_grad());
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t j = 0; j < 8; ++j) CHECK(e.at(r, j) == m.token_embedding().at(ids[r], j));
    std::vector<TokenId> bad{12};
    CHECK_THROWS_AS(m.embed(bad), Error);
}

TEST_CASE("forward matches independent reimplementation") {
    ModelConfig cfg{.vocab_size = 24, .dim = 32, .n_layers = 2, .n_heads = 4, .max_seq_len = 8, .ffn_mult = 4};
    auto m = MicroLM<double>::random_init(cfg, letters(20), 42);
    // make the norms and biases non-trivial so every term is exercised
    Rng rng(8);
    for (auto& [name, t] : m.named_parameters()) {
        if (name.find("gamma") != std::string::npos || name.find(".b") != std::string::npos ||
            name.find("beta") != std::string::npos) {
            Tensor<double> h = t;
            for (auto& v : h.mutable_data()) v += 0.1 * rng.normal();
        }
    }
    std::vector<std::vector<double>> x(6, std::vector<double>(32));
    std::vector<double> flat;
    for (auto& row : x)
        for (auto& v : row) flat.push_back(v = rng.normal());
    auto out = m.forward_logprobs(Tensor<double>::from({6, 32}, flat));
    auto ref = reference_forward(m, x);
    double worst = 0;
    for (std::size_t t = 0; t < 6; ++t)
        for (std::size_t v = 0; v < 24; ++v) worst = std::max(worst, std::abs(out.at(t, v) - ref[t][v]));
    CHECK(worst < 1e-5);

    auto mf = m.cast<float>();
    auto outf = mf.forward_logprobs(Tensor<float>::from({6, 32}, std::vector<float>(flat.begin(), flat.end())));
    for (std::size_t t = 0; t < 6; ++t) {
        double z = 0;
        for (std::size_t v = 0; v < 24; ++v) z += std::exp(static_cast<double>(outf.at(t, v)));
        CHECK(std::abs(z - 1.0) < 1e-5);
    }
}

TEST_CASE("causality probe and sequence length") {
    ModelConfig cfg{.vocab_size = 20, .dim = 16, .n_layers = 2, .n_heads = 2, .max_seq_len = 8, .ffn_mult = 2};
    auto m = MicroLM<float>::random_init(cfg, letters(16), 3);
    Rng rng(4);
    std::vector<float> x(7 * 16);
    for (auto& v : x) v = static_cast<float>(rng.normal());
    auto base = m.forward_logprobs(Tensor<float>::from({7, 16}, x));
    for (std::size_t t = 0; t < 7; ++t) {
        auto y = x;
        for (std::size_t j = 0; j < 16; ++j) y[t * 16 + j] += 0.5f;
        auto out = m.forward_logprobs(Tensor<float>::from({7, 16}, y));
        for (std::size_t i = 0; i < t * 20; ++i) REQUIRE(out.data()[i] == base.data()[i]);
    }
    try {
        m.forward_logprobs(Tensor<float>::zeros({9, 16}));
        FAIL("expected sequence-length error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::SequenceLength);
    }
}

TEST_CASE("frozen flags and checksum") {
    ModelConfig cfg{.vocab_size = 12, .dim = 8, .n_layers = 1, .n_heads = 2, .max_seq_len = 16, .ffn_mult = 2};
    auto a = MicroLM<float>::random_init(cfg, letters(8), 9);
    auto b = MicroLM<float>::random_init(cfg, letters(8), 9);
    auto c = MicroLM<float>::random_init(cfg, letters(8), 10);
    CHECK(a.frozen());
    CHECK(a.checksum() == b.checksum());
    CHECK(a.checksum() != c.checksum());
    a.set_trainable(true);
    CHECK_FALSE(a.frozen());
    a.set_trainable(false);
    CHECK(a.frozen());
    // 12*8 + 16*8 + block + final norm
    const std::size_t block = 4 * 8 + 8 * 24 + 24 + 8 * 8 + 8 + 8 * 16 + 16 + 16 * 8 + 8;
    CHECK(a.parameter_count() == 12 * 8 + 16 * 8 + block + 16);
    const char msg[] = "123456789";
    CHECK(crc32_bytes(msg, 9) == 0xCBF43926u);
}
