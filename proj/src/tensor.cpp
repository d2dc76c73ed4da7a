// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0

#include "pspt/tensor.hpp"

#include "pspt/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace pspt {

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

// ---------------------------------------------------------------------------
// Tensor

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
    std::vector<T> data(shape_numel(shape), T(0));
    return from(std::move(shape), std::move(data), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> data, bool requires_grad) {
    if (data.size() != shape_numel(shape)) {
        fail(ErrorKind::Dimension, "tensor data length " + std::to_string(data.size()) +
                                       " does not match shape " + shape_str(shape));
    }
    auto node = std::make_shared<Node<T>>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    Tensor t(std::move(node));
    t.set_requires_grad(requires_grad);
    return t;
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value) {
    return from(Shape{}, std::vector<T>{value});
}

template <typename T>
T Tensor<T>::item() const {
    if (numel() != 1) {
        fail(ErrorKind::Contract, "item() on tensor of shape " + shape_str(shape()));
    }
    return node_->data[0];
}

template <typename T>
void Tensor<T>::set_requires_grad(bool flag) {
    node_->requires_grad = flag;
    if (flag) {
        node_->grad.assign(node_->data.size(), T(0));
    } else {
        node_->grad.clear();
        node_->grad.shrink_to_fit();
    }
}

template <typename T>
void Tensor<T>::zero_grad() {
    std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
    return from(node_->shape, node_->data, false);
}

// ---------------------------------------------------------------------------
// Graph

template <typename T>
Graph<T>::Graph(const Tensor<T>& root) : root_(root) {
    if (!root.defined() || !root.requires_grad()) return;
    // Iterative post-order DFS yields a topological order (parents first).
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    seen.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node<T>* parent = node->parents[next++].get();
            if (parent->requires_grad && seen.insert(parent).second) {
                stack.emplace_back(parent, 0);
            }
        } else {
            order_.push_back(node);
            stack.pop_back();
        }
    }
}

template <typename T>
void Graph<T>::backward() {
    if (order_.empty()) return;
    Node<T>* root = order_.back();
    root->ensure_grad();
    std::fill(root->grad.begin(), root->grad.end(), T(1));
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
        Node<T>* node = *it;
        if (node->backward && !node->grad.empty()) node->backward(*node);
    }
    // Intermediate gradients are consumed; dropping them keeps repeated
    // backward passes over shared subgraphs from double counting.
    for (Node<T>* node : order_) {
        if (node->backward) {
            node->grad.clear();
            node->grad.shrink_to_fit();
        }
    }
}

template <typename T>
void backward(const Tensor<T>& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        fail(ErrorKind::Contract, "backward() requires a scalar loss, got shape " +
                                      (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
    }
    Graph<T>(loss).backward();
}

// ---------------------------------------------------------------------------
// Helpers

namespace {

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
bool any_requires_grad(std::initializer_list<const Tensor<T>*> inputs) {
    for (const auto* t : inputs) {
        if (t->requires_grad()) return true;
    }
    return false;
}

template <typename T>
Tensor<T> make_plain(Shape shape, std::vector<T> data, const char* op) {
    auto node = std::make_shared<Node<T>>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->op = op;
    return Tensor<T>(std::move(node));
}

template <typename T>
Tensor<T> make_tracked(Shape shape, std::vector<T> data, const char* op, std::vector<NodePtr<T>> parents,
                       std::function<void(Node<T>&)> rule) {
    auto node = std::make_shared<Node<T>>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->op = op;
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(rule);
    return Tensor<T>(std::move(node));
}

template <typename T>
void require_2d(const Tensor<T>& t, const char* op) {
    if (t.ndim() != 2) {
        fail(ErrorKind::Dimension, std::string(op) + ": expected a 2-D tensor, got " + shape_str(t.shape()));
    }
}

// C[m x n] += A[m x k] . B[k x n]
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        T* crow = c + i * n;
        const T* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = arow[p];
            const T* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m x n] += A[m x k] . B[n x k]^T
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const T* brow = b + j * k;
            T acc = T(0);
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

// C[k x n] += A[m x k]^T . B[m x n]
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t p = 0; p < m; ++p) {
        const T* arow = a + p * k;
        const T* brow = b + p * n;
        for (std::size_t i = 0; i < k; ++i) {
            const T av = arow[i];
            T* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape()) {
        fail(ErrorKind::Dimension,
             std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
}

} // namespace

// ---------------------------------------------------------------------------
// Linear algebra

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    require_2d(a, "matmul");
    require_2d(b, "matmul");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        fail(ErrorKind::Dimension, "matmul: inner dimensions differ, " + shape_str(a.shape()) + " . " +
                                       shape_str(b.shape()));
    }
    std::vector<T> out(m * n, T(0));
    gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
    if (!any_requires_grad({&a, &b})) return make_plain<T>({m, n}, std::move(out), "matmul");
    return make_tracked<T>({m, n}, std::move(out), "matmul", {a.node(), b.node()}, [m, k, n](Node<T>& self) {
        Node<T>& pa = *self.parents[0];
        Node<T>& pb = *self.parents[1];
        if (pa.requires_grad) gemm_nt(self.grad.data(), pb.data.data(), pa.ensure_grad().data(), m, n, k);
        if (pb.requires_grad) gemm_tn(pa.data.data(), self.grad.data(), pb.ensure_grad().data(), m, k, n);
    });
}

template <typename T>
Tensor<T> matmul_bt(const Tensor<T>& a, const Tensor<T>& b) {
    require_2d(a, "matmul_bt");
    require_2d(b, "matmul_bt");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    if (b.dim(1) != k) {
        fail(ErrorKind::Dimension, "matmul_bt: inner dimensions differ, " + shape_str(a.shape()) + " . " +
                                       shape_str(b.shape()) + "^T");
    }
    std::vector<T> out(m * n, T(0));
    gemm_nt(a.data().data(), b.data().data(), out.data(), m, k, n);
    if (!any_requires_grad({&a, &b})) return make_plain<T>({m, n}, std::move(out), "matmul_bt");
    return make_tracked<T>({m, n}, std::move(out), "matmul_bt", {a.node(), b.node()}, [m, k, n](Node<T>& self) {
        Node<T>& pa = *self.parents[0];
        Node<T>& pb = *self.parents[1];
        if (pa.requires_grad) gemm_nn(self.grad.data(), pb.data.data(), pa.ensure_grad().data(), m, n, k);
        if (pb.requires_grad) gemm_tn(self.grad.data(), pa.data.data(), pb.ensure_grad().data(), m, n, k);
    });
}

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "add");
    std::vector<T> out(a.numel());
    const auto ad = a.data();
    const auto bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
    if (!any_requires_grad({&a, &b})) return make_plain<T>(a.shape(), std::move(out), "add");
    return make_tracked<T>(a.shape(), std::move(out), "add", {a.node(), b.node()}, [](Node<T>& self) {
        for (auto& parent : self.parents) {
            if (!parent->requires_grad) continue;
            auto& g = parent->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "sub");
    std::vector<T> out(a.numel());
    const auto ad = a.data();
    const auto bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] - bd[i];
    if (!any_requires_grad({&a, &b})) return make_plain<T>(a.shape(), std::move(out), "sub");
    return make_tracked<T>(a.shape(), std::move(out), "sub", {a.node(), b.node()}, [](Node<T>& self) {
        Node<T>& pa = *self.parents[0];
        Node<T>& pb = *self.parents[1];
        if (pa.requires_grad) {
            auto& g = pa.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (pb.requires_grad) {
            auto& g = pb.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
    std::vector<T> out(a.numel());
    const auto ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * factor;
    if (!a.requires_grad()) return make_plain<T>(a.shape(), std::move(out), "scale");
    return make_tracked<T>(a.shape(), std::move(out), "scale", {a.node()}, [factor](Node<T>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
    });
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
    require_2d(x, "add_bias");
    const std::size_t n = x.dim(0), d = x.dim(1);
    if (bias.numel() != d) {
        fail(ErrorKind::Dimension,
             "add_bias: bias " + shape_str(bias.shape()) + " does not match rows of " + shape_str(x.shape()));
    }
    std::vector<T> out(x.data().begin(), x.data().end());
    const auto bd = bias.data();
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < d; ++c) out[r * d + c] += bd[c];
    }
    if (!any_requires_grad({&x, &bias})) return make_plain<T>(x.shape(), std::move(out), "add_bias");
    return make_tracked<T>(x.shape(), std::move(out), "add_bias", {x.node(), bias.node()}, [n, d](Node<T>& self) {
        Node<T>& px = *self.parents[0];
        Node<T>& pb = *self.parents[1];
        if (px.requires_grad) {
            auto& g = px.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (pb.requires_grad) {
            auto& g = pb.ensure_grad();
            for (std::size_t r = 0; r < n; ++r) {
                for (std::size_t c = 0; c < d; ++c) g[c] += self.grad[r * d + c];
            }
        }
    });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
    constexpr double kC = 0.7978845608028654; // sqrt(2/pi)
    constexpr double kA = 0.044715;
    const auto xd = x.data();
    std::vector<T> out(xd.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const T v = xd[i];
        out[i] = T(0.5) * v * (T(1) + std::tanh(T(kC) * (v + T(kA) * v * v * v)));
    }
    if (!x.requires_grad()) return make_plain<T>(x.shape(), std::move(out), "gelu");
    return make_tracked<T>(x.shape(), std::move(out), "gelu", {x.node()}, [](Node<T>& self) {
        Node<T>& px = *self.parents[0];
        auto& g = px.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const T v = px.data[i];
            const T th = std::tanh(T(kC) * (v + T(kA) * v * v * v));
            const T du = T(kC) * (T(1) + T(3 * kA) * v * v);
            const T dy = T(0.5) * (T(1) + th) + T(0.5) * v * (T(1) - th * th) * du;
            g[i] += self.grad[i] * dy;
        }
    });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    const auto xd = x.data();
    std::vector<T> out(xd.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] > T(0) ? xd[i] : T(0);
    if (!x.requires_grad()) return make_plain<T>(x.shape(), std::move(out), "relu");
    return make_tracked<T>(x.shape(), std::move(out), "relu", {x.node()}, [](Node<T>& self) {
        Node<T>& px = *self.parents[0];
        auto& g = px.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (px.data[i] > T(0)) g[i] += self.grad[i];
        }
    });
}

// ---------------------------------------------------------------------------
// Row manipulation

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const std::int32_t> ids) {
    require_2d(table, "gather_rows");
    const std::size_t vocab = table.dim(0), d = table.dim(1);
    std::vector<T> out(ids.size() * d);
    const auto td = table.data();
    for (std::size_t r = 0; r < ids.size(); ++r) {
        const auto id = ids[r];
        if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
            fail(ErrorKind::Vocabulary,
                 "token id " + std::to_string(id) + " outside vocabulary of size " + std::to_string(vocab));
        }
        std::copy_n(td.begin() + static_cast<std::ptrdiff_t>(id * d), d, out.begin() + static_cast<std::ptrdiff_t>(r * d));
    }
    Shape shape{ids.size(), d};
    if (!table.requires_grad()) return make_plain<T>(std::move(shape), std::move(out), "gather_rows");
    std::vector<std::int32_t> kept(ids.begin(), ids.end());
    return make_tracked<T>(std::move(shape), std::move(out), "gather_rows", {table.node()},
                           [kept = std::move(kept), d](Node<T>& self) {
                               auto& g = self.parents[0]->ensure_grad();
                               for (std::size_t r = 0; r < kept.size(); ++r) {
                                   T* dst = g.data() + static_cast<std::size_t>(kept[r]) * d;
                                   const T* src = self.grad.data() + r * d;
                                   for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
                               }
                           });
}

template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) fail(ErrorKind::Dimension, "concat_rows: no inputs");
    const std::size_t d = parts.front().ndim() == 2 ? parts.front().dim(1) : 0;
    std::size_t rows = 0;
    bool tracked = false;
    for (const auto& p : parts) {
        require_2d(p, "concat_rows");
        if (p.dim(1) != d) {
            fail(ErrorKind::Dimension, "concat_rows: column mismatch " + shape_str(parts.front().shape()) + " vs " +
                                           shape_str(p.shape()));
        }
        rows += p.dim(0);
        tracked = tracked || p.requires_grad();
    }
    std::vector<T> out;
    out.reserve(rows * d);
    for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    if (!tracked) return make_plain<T>({rows, d}, std::move(out), "concat_rows");
    std::vector<NodePtr<T>> parents;
    parents.reserve(parts.size());
    for (const auto& p : parts) parents.push_back(p.node());
    return make_tracked<T>({rows, d}, std::move(out), "concat_rows", std::move(parents), [](Node<T>& self) {
        std::size_t offset = 0;
        for (auto& parent : self.parents) {
            const std::size_t n = parent->data.size();
            if (parent->requires_grad) {
                auto& g = parent->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[offset + i];
            }
            offset += n;
        }
    });
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t end) {
    require_2d(x, "slice_rows");
    if (begin > end || end > x.dim(0)) {
        fail(ErrorKind::Dimension, "slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                                       ") outside " + shape_str(x.shape()));
    }
    const std::size_t d = x.dim(1);
    std::vector<T> out(x.data().begin() + static_cast<std::ptrdiff_t>(begin * d),
                       x.data().begin() + static_cast<std::ptrdiff_t>(end * d));
    if (!x.requires_grad()) return make_plain<T>({end - begin, d}, std::move(out), "slice_rows");
    return make_tracked<T>({end - begin, d}, std::move(out), "slice_rows", {x.node()}, [begin, d](Node<T>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * d + i] += self.grad[i];
    });
}

template <typename T>
Tensor<T> select_rows(const Tensor<T>& x, std::span<const std::size_t> rows) {
    require_2d(x, "select_rows");
    const std::size_t n = x.dim(0), d = x.dim(1);
    std::vector<T> out(rows.size() * d);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= n) {
            fail(ErrorKind::Dimension,
                 "select_rows: row " + std::to_string(rows[i]) + " outside " + shape_str(x.shape()));
        }
        std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(rows[i] * d), d,
                    out.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    if (!x.requires_grad()) return make_plain<T>({rows.size(), d}, std::move(out), "select_rows");
    std::vector<std::size_t> kept(rows.begin(), rows.end());
    return make_tracked<T>({rows.size(), d}, std::move(out), "select_rows", {x.node()},
                           [kept = std::move(kept), d](Node<T>& self) {
                               auto& g = self.parents[0]->ensure_grad();
                               for (std::size_t i = 0; i < kept.size(); ++i) {
                                   for (std::size_t c = 0; c < d; ++c) g[kept[i] * d + c] += self.grad[i * d + c];
                               }
                           });
}

// ---------------------------------------------------------------------------
// Normalization and attention

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
    if (x.ndim() == 0 || x.shape().back() == 0) {
        fail(ErrorKind::Dimension, "layer_norm: last dimension is empty in " + shape_str(x.shape()));
    }
    if (!(eps > T(0))) fail(ErrorKind::Contract, "layer_norm: eps must be positive");
    const std::size_t d = x.shape().back();
    if (gamma.numel() != d || beta.numel() != d) {
        fail(ErrorKind::Dimension, "layer_norm: affine parameters " + shape_str(gamma.shape()) + "/" +
                                       shape_str(beta.shape()) + " do not match width " + std::to_string(d));
    }
    const std::size_t rows = x.numel() / d;
    const auto xd = x.data();
    const auto gd = gamma.data();
    const auto bd = beta.data();
    std::vector<T> out(x.numel());
    std::vector<T> xhat(x.numel());
    std::vector<T> rstd(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* row = xd.data() + r * d;
        T mu = T(0);
        for (std::size_t c = 0; c < d; ++c) mu += row[c];
        mu /= T(d);
        T var = T(0);
        for (std::size_t c = 0; c < d; ++c) var += (row[c] - mu) * (row[c] - mu);
        var /= T(d);
        rstd[r] = T(1) / std::sqrt(var + eps);
        for (std::size_t c = 0; c < d; ++c) {
            const T h = (row[c] - mu) * rstd[r];
            xhat[r * d + c] = h;
            out[r * d + c] = h * gd[c] + bd[c];
        }
    }
    if (!any_requires_grad({&x, &gamma, &beta})) return make_plain<T>(x.shape(), std::move(out), "layer_norm");
    return make_tracked<T>(
        x.shape(), std::move(out), "layer_norm", {x.node(), gamma.node(), beta.node()},
        [xhat = std::move(xhat), rstd = std::move(rstd), rows, d](Node<T>& self) {
            Node<T>& px = *self.parents[0];
            Node<T>& pg = *self.parents[1];
            Node<T>& pb = *self.parents[2];
            const T* dy = self.grad.data();
            if (pg.requires_grad) {
                auto& g = pg.ensure_grad();
                for (std::size_t i = 0; i < rows * d; ++i) g[i % d] += dy[i] * xhat[i];
            }
            if (pb.requires_grad) {
                auto& g = pb.ensure_grad();
                for (std::size_t i = 0; i < rows * d; ++i) g[i % d] += dy[i];
            }
            if (px.requires_grad) {
                auto& g = px.ensure_grad();
                for (std::size_t r = 0; r < rows; ++r) {
                    T mean_dh = T(0), mean_dh_h = T(0);
                    for (std::size_t c = 0; c < d; ++c) {
                        const T dh = dy[r * d + c] * pg.data[c];
                        mean_dh += dh;
                        mean_dh_h += dh * xhat[r * d + c];
                    }
                    mean_dh /= T(d);
                    mean_dh_h /= T(d);
                    for (std::size_t c = 0; c < d; ++c) {
                        const T dh = dy[r * d + c] * pg.data[c];
                        g[r * d + c] += rstd[r] * (dh - mean_dh - xhat[r * d + c] * mean_dh_h);
                    }
                }
            }
        });
}

template <typename T>
Tensor<T> causal_attention(const Tensor<T>& qkv, std::size_t n_heads) {
    require_2d(qkv, "causal_attention");
    const std::size_t len = qkv.dim(0);
    if (n_heads == 0 || qkv.dim(1) % (3 * n_heads) != 0) {
        fail(ErrorKind::Dimension, "causal_attention: width of " + shape_str(qkv.shape()) +
                                       " is not 3 x heads x head_dim for " + std::to_string(n_heads) + " heads");
    }
    const std::size_t d = qkv.dim(1) / 3;
    const std::size_t hd = d / n_heads;
    const std::size_t stride = 3 * d;
    const T inv_sqrt = T(1) / std::sqrt(T(hd));
    const T* in = qkv.data().data();

    std::vector<T> out(len * d, T(0));
    // probs[h][i][j] for j <= i, stored densely as len x len per head.
    std::vector<T> probs(n_heads * len * len, T(0));
    for (std::size_t h = 0; h < n_heads; ++h) {
        const std::size_t qo = h * hd, ko = d + h * hd, vo = 2 * d + h * hd;
        for (std::size_t i = 0; i < len; ++i) {
            T* p = probs.data() + (h * len + i) * len;
            const T* q = in + i * stride + qo;
            T mx = -std::numeric_limits<T>::infinity();
            for (std::size_t j = 0; j <= i; ++j) {
                const T* k = in + j * stride + ko;
                T s = T(0);
                for (std::size_t c = 0; c < hd; ++c) s += q[c] * k[c];
                p[j] = s * inv_sqrt;
                mx = std::max(mx, p[j]);
            }
            T z = T(0);
            for (std::size_t j = 0; j <= i; ++j) {
                p[j] = std::exp(p[j] - mx);
                z += p[j];
            }
            T* o = out.data() + i * d + h * hd;
            for (std::size_t j = 0; j <= i; ++j) {
                p[j] /= z;
                const T* v = in + j * stride + vo;
                for (std::size_t c = 0; c < hd; ++c) o[c] += p[j] * v[c];
            }
        }
    }
    if (!qkv.requires_grad()) return make_plain<T>({len, d}, std::move(out), "causal_attention");
    return make_tracked<T>(
        {len, d}, std::move(out), "causal_attention", {qkv.node()},
        [probs = std::move(probs), len, d, hd, n_heads, stride, inv_sqrt](Node<T>& self) {
            Node<T>& px = *self.parents[0];
            const T* in = px.data.data();
            T* g = px.ensure_grad().data();
            std::vector<T> dp(len);
            for (std::size_t h = 0; h < n_heads; ++h) {
                const std::size_t qo = h * hd, ko = d + h * hd, vo = 2 * d + h * hd;
                for (std::size_t i = 0; i < len; ++i) {
                    const T* p = probs.data() + (h * len + i) * len;
                    const T* dout = self.grad.data() + i * d + h * hd;
                    T dot = T(0);
                    for (std::size_t j = 0; j <= i; ++j) {
                        const T* v = in + j * stride + vo;
                        T* dv = g + j * stride + vo;
                        T acc = T(0);
                        for (std::size_t c = 0; c < hd; ++c) {
                            acc += dout[c] * v[c];
                            dv[c] += p[j] * dout[c];
                        }
                        dp[j] = acc;
                        dot += p[j] * acc;
                    }
                    const T* q = in + i * stride + qo;
                    T* dq = g + i * stride + qo;
                    for (std::size_t j = 0; j <= i; ++j) {
                        const T ds = p[j] * (dp[j] - dot) * inv_sqrt;
                        const T* k = in + j * stride + ko;
                        T* dk = g + j * stride + ko;
                        for (std::size_t c = 0; c < hd; ++c) {
                            dq[c] += ds * k[c];
                            dk[c] += ds * q[c];
                        }
                    }
                }
            }
        });
}

template <typename T>
Tensor<T> log_softmax_rows(const Tensor<T>& x) {
    require_2d(x, "log_softmax_rows");
    const std::size_t n = x.dim(0), v = x.dim(1);
    if (v == 0) fail(ErrorKind::Dimension, "log_softmax_rows: rows are empty in " + shape_str(x.shape()));
    const auto xd = x.data();
    std::vector<T> out(xd.size());
    for (std::size_t r = 0; r < n; ++r) {
        const T* row = xd.data() + r * v;
        T mx = row[0];
        for (std::size_t c = 0; c < v; ++c) {
            if (!std::isfinite(row[c])) {
                fail(ErrorKind::Numeric, "log_softmax_rows: non-finite input at row " + std::to_string(r) +
                                             ", column " + std::to_string(c));
            }
            mx = std::max(mx, row[c]);
        }
        T z = T(0);
        for (std::size_t c = 0; c < v; ++c) z += std::exp(row[c] - mx);
        const T lz = mx + std::log(z);
        for (std::size_t c = 0; c < v; ++c) out[r * v + c] = row[c] - lz;
    }
    if (!x.requires_grad()) return make_plain<T>(x.shape(), std::move(out), "log_softmax_rows");
    return make_tracked<T>(x.shape(), std::move(out), "log_softmax_rows", {x.node()}, [n, v](Node<T>& self) {
        auto& g = self.parents[0]->ensure_grad();
        const T* y = self.data.data(); // softmax = exp(y)
        for (std::size_t r = 0; r < n; ++r) {
            const T* dy = self.grad.data() + r * v;
            T total = T(0);
            bool touched = false;
            for (std::size_t c = 0; c < v; ++c) {
                total += dy[c];
                touched = touched || dy[c] != T(0);
            }
            if (!touched) continue; // rows nobody picked
            for (std::size_t c = 0; c < v; ++c) g[r * v + c] += dy[c] - std::exp(y[r * v + c]) * total;
        }
    });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename T>
Tensor<T> pick(const Tensor<T>& x, std::span<const std::size_t> rows, std::span<const std::int32_t> cols) {
    require_2d(x, "pick");
    if (rows.size() != cols.size()) {
        fail(ErrorKind::Dimension, "pick: " + std::to_string(rows.size()) + " rows but " +
                                       std::to_string(cols.size()) + " columns");
    }
    const std::size_t n = x.dim(0), v = x.dim(1);
    std::vector<std::size_t> flat(rows.size());
    std::vector<T> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= n || cols[i] < 0 || static_cast<std::size_t>(cols[i]) >= v) {
            fail(ErrorKind::Dimension, "pick: index (" + std::to_string(rows[i]) + ", " + std::to_string(cols[i]) +
                                           ") outside " + shape_str(x.shape()));
        }
        flat[i] = rows[i] * v + static_cast<std::size_t>(cols[i]);
        out[i] = x.data()[flat[i]];
    }
    if (!x.requires_grad()) return make_plain<T>({rows.size()}, std::move(out), "pick");
    return make_tracked<T>({rows.size()}, std::move(out), "pick", {x.node()}, [flat = std::move(flat)](Node<T>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < flat.size(); ++i) g[flat[i]] += self.grad[i];
    });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
    T total = T(0);
    for (T v : x.data()) total += v;
    if (!x.requires_grad()) return make_plain<T>({}, {total}, "sum");
    return make_tracked<T>({}, {total}, "sum", {x.node()}, [](Node<T>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (auto& v : g) v += self.grad[0];
    });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
    if (x.numel() == 0) fail(ErrorKind::Dimension, "mean of an empty tensor");
    return scale(sum(x), T(1) / T(x.numel()));
}

// ---------------------------------------------------------------------------
// Explicit instantiation

#define PSPT_INSTANTIATE(T)                                                                                \
    template class Tensor<T>;                                                                              \
    template class Graph<T>;                                                                               \
    template void backward<T>(const Tensor<T>&);                                                           \
    template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                                      \
    template Tensor<T> matmul_bt<T>(const Tensor<T>&, const Tensor<T>&);                                   \
    template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                                         \
    template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                                         \
    template Tensor<T> scale<T>(const Tensor<T>&, T);                                                      \
    template Tensor<T> add_bias<T>(const Tensor<T>&, const Tensor<T>&);                                    \
    template Tensor<T> gather_rows<T>(const Tensor<T>&, std::span<const std::int32_t>);                    \
    template Tensor<T> concat_rows<T>(const std::vector<Tensor<T>>&);                                      \
    template Tensor<T> slice_rows<T>(const Tensor<T>&, std::size_t, std::size_t);                          \
    template Tensor<T> select_rows<T>(const Tensor<T>&, std::span<const std::size_t>);                     \
    template Tensor<T> layer_norm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);             \
    template Tensor<T> gelu<T>(const Tensor<T>&);                                                          \
    template Tensor<T> relu<T>(const Tensor<T>&);                                                          \
    template Tensor<T> causal_attention<T>(const Tensor<T>&, std::size_t);                                 \
    template Tensor<T> log_softmax_rows<T>(const Tensor<T>&);                                              \
    template Tensor<T> pick<T>(const Tensor<T>&, std::span<const std::size_t>, std::span<const std::int32_t>); \
    template Tensor<T> sum<T>(const Tensor<T>&);                                                           \
    template Tensor<T> mean<T>(const Tensor<T>&);

PSPT_INSTANTIATE(float)
PSPT_INSTANTIATE(double)

#undef PSPT_INSTANTIATE

} // namespace pspt
