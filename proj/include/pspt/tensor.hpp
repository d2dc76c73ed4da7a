// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major tensors with reverse-mode automatic differentiation.
//
// A Tensor is a cheap handle onto a shared Node. Operations build a DAG of
// nodes on the fly; only nodes that (transitively) depend on a tensor with
// requires_grad=true get a backward rule and a gradient buffer. The scalar
// type is a template parameter: float for training and scoring, double for
// gradient verification. Both are explicitly instantiated in tensor.cpp.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace pspt {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
struct Node {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad; // empty until the first accumulation
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    std::vector<T>& ensure_grad() {
        if (grad.empty() && !data.empty()) grad.assign(data.size(), T(0));
        return grad;
    }
};

template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<T> data, bool requires_grad = false);
    static Tensor scalar(T value);

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    std::size_t ndim() const { return node_->shape.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t numel() const { return node_->data.size(); }

    std::span<const T> data() const { return node_->data; }
    /// Writable view for leaves (optimizer updates, initialization).
    std::span<T> mutable_data() { return node_->data; }
    T item() const;
    T at(std::size_t row, std::size_t col) const { return node_->data[row * node_->shape[1] + col]; }

    bool requires_grad() const { return node_->requires_grad; }
    /// Enabling allocates a zeroed gradient buffer; disabling releases it.
    void set_requires_grad(bool flag);
    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const T> grad() const { return node_->grad; }
    std::span<T> mutable_grad() { return node_->grad; }
    void zero_grad();

    /// Copy of the values with no graph history and requires_grad=false.
    Tensor detach() const;

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(node_->data.begin(), node_->data.end());
        return Tensor<U>::from(node_->shape, std::move(out), node_->requires_grad);
    }

    const std::shared_ptr<Node<T>>& node() const { return node_; }

private:
    std::shared_ptr<Node<T>> node_;
};

/// Topologically ordered view of the graph reachable from a root tensor.
/// Only nodes that require grad are recorded: the others contribute nothing
/// to backward.
template <typename T>
class Graph {
public:
    explicit Graph(const Tensor<T>& root);

    std::size_t size() const { return order_.size(); }
    const std::vector<Node<T>*>& order() const { return order_; }

    /// Seeds d(root)/d(root)=1 and runs every backward rule in reverse
    /// topological order, each exactly once.
    void backward();

private:
    Tensor<T> root_;
    std::vector<Node<T>*> order_;
};

/// Fills gradient buffers of every requires_grad tensor the scalar `loss`
/// depends on. Throws Contract for a non-scalar loss.
template <typename T>
void backward(const Tensor<T>& loss);

// ---------------------------------------------------------------------------
// Operations. 2-D tensors are [rows x cols]; vectors are 1-D.

/// [m x k] . [k x n]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// [m x k] . [n x k]^T, used for the weight-tied output head.
template <typename T>
Tensor<T> matmul_bt(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);

/// x[n x d] + bias[d] broadcast over rows.
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);

/// rows of table[V x d] selected by ids -> [ids.size() x d]; scatter-add backward.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const std::int32_t> ids);

/// Vertical concatenation of 2-D tensors with equal column counts.
template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts);

/// rows [begin, end) of a 2-D tensor.
template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t end);

/// Arbitrary row selection (duplicates allowed).
template <typename T>
Tensor<T> select_rows(const Tensor<T>& x, std::span<const std::size_t> rows);

/// Normalizes over the last dimension, then applies gamma/beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps);

/// tanh approximation of GELU.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

/// Multi-head causal self-attention. qkv is [L x 3d] holding the query, key
/// and value projections side by side; output is [L x d]. Position i attends
/// to positions j <= i only.
template <typename T>
Tensor<T> causal_attention(const Tensor<T>& qkv, std::size_t n_heads);

/// Row-wise log-softmax with row-max subtraction. Throws Numeric on NaN/Inf.
template <typename T>
Tensor<T> log_softmax_rows(const Tensor<T>& x);

/// out[i] = x[rows[i], cols[i]] -> 1-D tensor.
template <typename T>
Tensor<T> pick(const Tensor<T>& x, std::span<const std::size_t> rows, std::span<const std::int32_t> cols);

/// Sum of all elements -> scalar.
template <typename T>
Tensor<T> sum(const Tensor<T>& x);

/// Mean of all elements -> scalar.
template <typename T>
Tensor<T> mean(const Tensor<T>& x);

} // namespace pspt
