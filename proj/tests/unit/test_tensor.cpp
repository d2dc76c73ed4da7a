// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include "pspt/error.hpp"
#include "pspt/gradcheck.hpp"
#include "pspt/rng.hpp"
#include "pspt/tensor.hpp"

#include <cmath>
#include <limits>

using namespace pspt;

namespace {

Tensor<double> random_tensor(Shape shape, Rng& rng, bool grad = false, double scale = 1.0) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = rng.normal() * scale;
    return Tensor<double>::from(std::move(shape), std::move(v), grad);
}

// Compares backward() against central differences for loss(leaves).
double grad_error(const std::function<Tensor<double>()>& loss, std::vector<Tensor<double>> leaves) {
    for (auto& l : leaves) l.zero_grad();
    backward(loss());
    std::vector<double> analytic;
    for (auto& l : leaves) analytic.insert(analytic.end(), l.grad().begin(), l.grad().end());
    auto numeric = finite_diff_grad<double>([&] { return loss().item(); }, leaves, 1e-5);
    return max_relative_error<double>(analytic, numeric);
}

} // namespace

TEST_CASE("matmul values and shapes") {
    auto eye = Tensor<double>::from({2, 2}, {1, 0, 0, 1});
    auto x = Tensor<double>::from({2, 2}, {1.5, -2, 3, 4});
    auto y = matmul(eye, x);
    for (std::size_t i = 0; i < 4; ++i) CHECK(y.data()[i] == x.data()[i]);

    auto a = Tensor<double>::from({2, 2}, {1, 2, 3, 4});
    auto z = matmul(a, Tensor<double>::zeros({2, 1}));
    CHECK(z.shape() == Shape{2, 1});
    CHECK(z.data()[0] == 0.0);
    CHECK(z.data()[1] == 0.0);

    try {
        matmul(a, Tensor<double>::zeros({3, 1}));
        FAIL("expected dimension error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Dimension);
        CHECK(std::string(e.what()).find("[2x2]") != std::string::npos);
        CHECK(std::string(e.what()).find("[3x1]") != std::string::npos);
    }
}

TEST_CASE("matmul gradients match finite differences") {
    Rng rng(7);
    auto a = random_tensor({3, 4}, rng, true);
    auto b = random_tensor({4, 2}, rng, true);
    CHECK(grad_error([&] { return sum(matmul(a, b)); }, {a}) < 1e-6);
    CHECK(grad_error([&] { return sum(matmul(a, b)); }, {a, b}) < 1e-6);
    auto c = random_tensor({5, 4}, rng, true);
    auto w = random_tensor({5, 1}, rng);
    CHECK(grad_error([&] { return sum(matmul(matmul_bt(a, c), w)); }, {a, c}) < 1e-6);
}

TEST_CASE("log_softmax_rows") {
    auto u = log_softmax_rows(Tensor<double>::from({1, 4}, {2, 2, 2, 2}));
    for (double v : u.data()) CHECK(v == doctest::Approx(-1.3862944).epsilon(1e-7));

    const double big = 1e30;
    auto s = log_softmax_rows(Tensor<double>::from({1, 2}, {big, -big}));
    CHECK(s.data()[0] == 0.0);
    CHECK(s.data()[1] == doctest::Approx(-2 * big));

    Rng rng(3);
    auto r = log_softmax_rows(random_tensor({2, 8}, rng, false, 3.0));
    for (std::size_t row = 0; row < 2; ++row) {
        double total = 0;
        for (std::size_t c = 0; c < 8; ++c) total += std::exp(r.at(row, c));
        CHECK(std::abs(total - 1.0) < 1e-6);
    }

    auto f = Tensor<float>::from({1, 3}, {1.f, std::numeric_limits<float>::quiet_NaN(), 0.f});
    CHECK_THROWS_AS(log_softmax_rows(f), Error);
    try {
        log_softmax_rows(Tensor<double>::from({1, 2}, {1.0, INFINITY}));
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Numeric);
    }
}

TEST_CASE("layer_norm moments and edge cases") {
    auto one = Tensor<double>::from({2}, {1, 1});
    auto zero = Tensor<double>::zeros({2});
    auto c = layer_norm(Tensor<double>::from({1, 2}, {3, 3}), one, zero, 1e-5);
    CHECK(c.data()[0] == 0.0);
    CHECK(c.data()[1] == 0.0);

    auto n = layer_norm(Tensor<double>::from({1, 2}, {1, -1}), one, zero, 1e-12);
    CHECK(n.data()[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(n.data()[1] == doctest::Approx(-1.0).epsilon(1e-9));

    Rng rng(11);
    const std::size_t d = 16;
    auto g = Tensor<double>::from({d}, std::vector<double>(d, 1.0));
    auto x = layer_norm(random_tensor({4, d}, rng, false, 5.0), g, Tensor<double>::zeros({d}), 1e-5);
    for (std::size_t r = 0; r < 4; ++r) {
        double m = 0, v = 0;
        for (std::size_t j = 0; j < d; ++j) m += x.at(r, j);
        m /= d;
        for (std::size_t j = 0; j < d; ++j) v += (x.at(r, j) - m) * (x.at(r, j) - m);
        v /= d;
        CHECK(std::abs(m) < 1e-4);
        CHECK(std::abs(v - 1.0) < 1e-4);
    }
    CHECK_THROWS_AS(layer_norm(Tensor<double>::zeros({2, 0}), Tensor<double>::zeros({0}),
                               Tensor<double>::zeros({0}), 1e-5),
                    Error);
}

TEST_CASE("backward basics") {
    auto x = Tensor<double>::from({3}, {1, 2, 3}, true);
    backward(sum(x));
    for (double g : x.grad()) CHECK(g == 1.0);

    x.zero_grad();
    auto y = Tensor<double>::from({3}, {4, 5, 6}, true);
    backward(sum(y));
    for (double g : x.grad()) CHECK(g == 0.0);

    auto frozen = Tensor<double>::from({3}, {1, 1, 1});
    backward(sum(add(frozen, y)));
    CHECK_FALSE(frozen.has_grad());

    try {
        backward(add(x, y));
        FAIL("expected contract error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Contract);
    }
}

TEST_CASE("graph visits each node once in reverse topological order") {
    auto x = Tensor<double>::from({2}, {1, 2}, true);
    auto a = scale(x, 2.0);
    auto b = add(a, a); // diamond
    auto loss = sum(add(b, x));
    Graph<double> g(loss);
    CHECK(g.size() == 5);
    // every parent appears before its child
    const auto& order = g.order();
    for (std::size_t i = 0; i < order.size(); ++i) {
        for (const auto& p : order[i]->parents) {
            if (!p->requires_grad) continue;
            bool seen = false;
            for (std::size_t j = 0; j < i; ++j) seen = seen || order[j] == p.get();
            CHECK(seen);
        }
    }
    g.backward();
    CHECK(x.grad()[0] == 5.0);
}

TEST_CASE("composite op gradients") {
    Rng rng(21);
    auto x = random_tensor({5, 8}, rng, true);
    auto gamma = random_tensor({8}, rng, true);
    auto beta = random_tensor({8}, rng, true);
    auto w = random_tensor({5, 8}, rng);
    auto weighted = [&](const Tensor<double>& t) { return sum(matmul_bt(t, w)); };
    CHECK(grad_error([&] { return weighted(layer_norm(x, gamma, beta, 1e-5)); }, {x, gamma, beta}) < 1e-4);
    CHECK(grad_error([&] { return weighted(gelu(x)); }, {x}) < 1e-4);
    CHECK(grad_error([&] { return weighted(add_bias(x, beta)); }, {x, beta}) < 1e-6);
    CHECK(grad_error([&] { return weighted(sub(scale(x, 0.5), w)); }, {x}) < 1e-6);

    auto lp = [&] {
        std::vector<std::size_t> rows{0, 2, 4, 4};
        std::vector<std::int32_t> cols{1, 7, 0, 3};
        return mean(pick(log_softmax_rows(x), rows, cols));
    };
    CHECK(grad_error(lp, {x}) < 1e-4);

    auto table = random_tensor({6, 8}, rng, true);
    std::vector<std::int32_t> ids{3, 0, 3, 5};
    std::vector<std::size_t> sel{1, 1, 0};
    auto w4 = random_tensor({3, 8}, rng);
    CHECK(grad_error(
              [&] {
                  auto g = gather_rows(table, ids);
                  auto c = concat_rows(std::vector<Tensor<double>>{slice_rows(g, 1, 3), x});
                  return sum(matmul_bt(select_rows(c, sel), w4));
              },
              {table, x}) < 1e-6);
}

TEST_CASE("causal attention gradient and causality") {
    Rng rng(5);
    auto qkv = random_tensor({6, 24}, rng, true);
    auto w = random_tensor({6, 8}, rng);
    CHECK(grad_error([&] { return sum(matmul_bt(causal_attention(qkv, 2), w)); }, {qkv}) < 1e-4);

    auto base = causal_attention(qkv, 2);
    auto bumped = qkv.detach();
    bumped.mutable_data()[4 * 24 + 3] += 1.0;
    bumped.mutable_data()[4 * 24 + 10] -= 2.0;
    auto out = causal_attention(bumped, 2);
    for (std::size_t i = 0; i < 4 * 8; ++i) CHECK(out.data()[i] == base.data()[i]);
}

TEST_CASE("gather_rows rejects out-of-range ids") {
    auto table = Tensor<float>::zeros({4, 2});
    std::vector<std::int32_t> ids{4};
    try {
        gather_rows(table, std::span<const std::int32_t>(ids));
        FAIL("expected vocabulary error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Vocabulary);
    }
}

TEST_CASE("finite_diff_grad contract") {
    auto sq = [](std::span<const double> p) { return p[0] * p[0]; };
    auto g = finite_diff_grad<double>(sq, {3.0}, 1e-5);
    CHECK(std::abs(g[0] - 6.0) < 1e-6);
    auto c = finite_diff_grad<double>([](std::span<const double>) { return 2.5; }, {1.0, 2.0}, 1e-4);
    CHECK(c[0] == 0.0);
    CHECK(c[1] == 0.0);
    CHECK_THROWS_AS(finite_diff_grad<double>(sq, {1.0}, 1e-2), Error);
    try {
        finite_diff_grad<double>([](std::span<const double>) { return std::nan(""); }, {1.0}, 1e-5);
        FAIL("expected numeric error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Numeric);
    }
}

TEST_CASE("operations are deterministic") {
    Rng r1(99), r2(99);
    auto a = random_tensor({4, 4}, r1), b = random_tensor({4, 4}, r2);
    auto x = log_softmax_rows(matmul(a, a));
    auto y = log_softmax_rows(matmul(b, b));
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(x.data()[i] == y.data()[i]);
}
