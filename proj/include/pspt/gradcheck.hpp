// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Central finite differences, the independent oracle for backward().

#pragma once

#include "pspt/error.hpp"
#include "pspt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace pspt {

namespace detail {

inline void check_fd_eps(double eps) {
    if (!(eps >= 1e-6 && eps <= 1e-3)) {
        fail(ErrorKind::Contract, "finite_diff_grad: eps " + std::to_string(eps) + " outside [1e-6, 1e-3]");
    }
}

template <typename T>
T checked_eval(const std::function<T()>& f) {
    const T v = f();
    if (!std::isfinite(v)) fail(ErrorKind::Numeric, "finite_diff_grad: objective returned a non-finite value");
    return v;
}

} // namespace detail

/// (f(p + eps e_i) - f(p - eps e_i)) / (2 eps) for every coordinate i.
template <typename T>
std::vector<T> finite_diff_grad(const std::function<T(std::span<const T>)>& f, std::vector<T> params, T eps) {
    detail::check_fd_eps(static_cast<double>(eps));
    std::vector<T> grad(params.size());
    const std::function<T()> eval = [&] { return f(params); };
    for (std::size_t i = 0; i < params.size(); ++i) {
        const T saved = params[i];
        params[i] = saved + eps;
        const T up = detail::checked_eval(eval);
        params[i] = saved - eps;
        const T down = detail::checked_eval(eval);
        params[i] = saved;
        grad[i] = (up - down) / (T(2) * eps);
    }
    return grad;
}

/// Same estimate, perturbing leaf tensors in place. Each tensor's values are
/// restored after its coordinates are visited. The result is the
/// concatenation of per-tensor gradients in argument order.
template <typename T>
std::vector<T> finite_diff_grad(const std::function<T()>& f, std::vector<Tensor<T>> leaves, T eps) {
    detail::check_fd_eps(static_cast<double>(eps));
    std::vector<T> grad;
    for (auto& leaf : leaves) {
        auto values = leaf.mutable_data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const T saved = values[i];
            values[i] = saved + eps;
            const T up = detail::checked_eval(f);
            values[i] = saved - eps;
            const T down = detail::checked_eval(f);
            values[i] = saved;
            grad.push_back((up - down) / (T(2) * eps));
        }
    }
    return grad;
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). The floor keeps coordinates
/// whose true gradient is ~0 from dividing rounding noise by zero.
template <typename T>
double max_relative_error(std::span<const T> a, std::span<const T> b, double floor = 1e-6) {
    if (a.size() != b.size()) fail(ErrorKind::Dimension, "max_relative_error: length mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = static_cast<double>(a[i]);
        const double y = static_cast<double>(b[i]);
        const double denom = std::max({std::abs(x), std::abs(y), floor});
        worst = std::max(worst, std::abs(x - y) / denom);
    }
    return worst;
}

} // namespace pspt
