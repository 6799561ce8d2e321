// SPDX-License-Identifier: Apache-2.0
//
// Dense float64 tensors with tape-free reverse-mode autodiff. Every op that
// sees a grad-requiring input records its parents and a backprop closure on
// the result node; backward() walks the graph in reverse topological order.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "grassnet/errors.hpp"

namespace grassnet {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents that require grad.
  std::function<void(Node&)> backprop;

  bool is_leaf() const { return !backprop; }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false) {
    if (detail::numel(shape) != values.size()) {
      throw ShapeError("tensor shape " + shape_str(shape) + " does not match " +
                       std::to_string(values.size()) + " values");
    }
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }
  static Tensor full(Shape shape, double v, bool requires_grad = false) {
    const auto count = detail::numel(shape);
    return from(std::move(shape), std::vector<double>(count, v), requires_grad);
  }
  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), 0.0, requires_grad);
  }
  static Tensor scalar(double v, bool requires_grad = false) { return from({}, {v}, requires_grad); }
  static Tensor eye(std::size_t n) {
    auto t = zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) t.node_->value[i * n + i] = 1.0;
    return t;
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const double> values() const { return node_->value; }
  /// Direct write access; only meaningful on leaves (parameters, inputs).
  std::span<double> mutable_values() { return node_->value; }
  double operator[](std::size_t i) const { return node_->value[i]; }
  double at(std::size_t i, std::size_t j) const { return node_->value[i * node_->shape.back() + j]; }
  double item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  /// Gradient view; empty until backward() reached this tensor.
  std::span<const double> grad() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  /// Fresh leaf with copied values and no history.
  Tensor detach() const { return from(shape(), node_->value, false); }

  void backward() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

namespace detail {

inline Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                          std::function<void(Node&)> backprop) {
  auto out = std::make_shared<Node>();
  out->shape = std::move(shape);
  out->value = std::move(value);
  const bool track = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.requires_grad(); });
  if (track) {
    out->requires_grad = true;
    for (auto& t : inputs) out->parents.push_back(t.node());
    out->backprop = std::move(backprop);
  }
  return Tensor(std::move(out));
}

// Accumulation target for parent k, or nullptr if it does not want gradients.
inline double* grad_target(Node& self, std::size_t k) {
  auto& p = *self.parents[k];
  if (!p.requires_grad) return nullptr;
  p.ensure_grad();
  return p.grad.data();
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// c (+)= op(a) * op(b); op(a) is m x k, op(b) is k x n, all row-major.
inline void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
                 const double* b, double* c, bool accumulate) {
  using CMap = Eigen::Map<const RowMat>;
  const auto em = static_cast<Eigen::Index>(m), en = static_cast<Eigen::Index>(n),
             ek = static_cast<Eigen::Index>(k);
  CMap A(a, ta ? ek : em, ta ? em : ek);
  CMap B(b, tb ? en : ek, tb ? ek : en);
  Eigen::Map<RowMat> C(c, em, en);
  auto run = [&](const auto& lhs, const auto& rhs) {
    if (accumulate) {
      C.noalias() += lhs * rhs;
    } else {
      C.noalias() = lhs * rhs;
    }
  };
  if (!ta && !tb) run(A, B);
  else if (ta && !tb) run(A.transpose(), B);
  else if (!ta && tb) run(A, B.transpose());
  else run(A.transpose(), B.transpose());
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

}  // namespace detail

inline void Tensor::backward() const {
  if (numel() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " + shape_str(shape()));
  }
  if (!requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  // Interior grads are per-call scratch; only leaves accumulate across calls.
  for (auto* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->value.size(), 0.0);
  }
  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (!(*it)->is_leaf()) (*it)->backprop(**it);
  }
}

// ---------------------------------------------------------------------------
// Shape manipulation

inline Tensor reshape(const Tensor& x, Shape shape) {
  if (detail::numel(shape) != x.numel()) {
    throw ShapeError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  return detail::make_result(std::move(shape), std::vector<double>(x.values().begin(), x.values().end()),
                             {x}, [](detail::Node& self) {
                               if (double* g = detail::grad_target(self, 0)) {
                                 for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
                               }
                             });
}

/// Swaps the last two axes (rank >= 2).
inline Tensor transpose(const Tensor& x) {
  if (x.rank() < 2) throw ShapeError("transpose needs rank >= 2, got " + shape_str(x.shape()));
  const std::size_t r = x.dim(x.rank() - 2), c = x.dim(x.rank() - 1);
  const std::size_t batch = x.numel() / std::max<std::size_t>(r * c, 1);
  Shape out_shape = x.shape();
  std::swap(out_shape[out_shape.size() - 1], out_shape[out_shape.size() - 2]);
  std::vector<double> out(x.numel());
  const auto in = x.values();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out[b * r * c + j * r + i] = in[b * r * c + i * c + j];
  return detail::make_result(std::move(out_shape), std::move(out), {x}, [batch, r, c](detail::Node& self) {
    if (double* g = detail::grad_target(self, 0)) {
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) g[b * r * c + i * c + j] += self.grad[b * r * c + j * r + i];
    }
  });
}

/// Columns [start, start+len) of the last axis.
inline Tensor slice_last(const Tensor& x, std::size_t start, std::size_t len) {
  const std::size_t width = x.shape().back();
  if (start + len > width) throw ShapeError("slice_last out of range on " + shape_str(x.shape()));
  const std::size_t rows = x.numel() / width;
  Shape shape = x.shape();
  shape.back() = len;
  std::vector<double> out(rows * len);
  const auto in = x.values();
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(r * width + start), len, out.begin() + static_cast<std::ptrdiff_t>(r * len));
  return detail::make_result(std::move(shape), std::move(out), {x}, [=](detail::Node& self) {
    if (double* g = detail::grad_target(self, 0)) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < len; ++j) g[r * width + start + j] += self.grad[r * len + j];
    }
  });
}

/// Concatenates along the last axis; leading shapes must agree.
inline Tensor concat_last(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw ShapeError("concat_last of nothing");
  Shape lead(xs[0].shape().begin(), xs[0].shape().end() - 1);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& t : xs) {
    if (Shape(t.shape().begin(), t.shape().end() - 1) != lead) {
      throw ShapeError("concat_last: " + shape_str(xs[0].shape()) + " vs " + shape_str(t.shape()));
    }
    widths.push_back(t.shape().back());
    total += t.shape().back();
  }
  const std::size_t rows = detail::numel(lead);
  std::vector<double> out(rows * total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto in = xs[k].values();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < widths[k]; ++j) out[r * total + off + j] = in[r * widths[k] + j];
    off += widths[k];
  }
  Shape shape = lead;
  shape.push_back(total);
  return detail::make_result(std::move(shape), std::move(out), xs, [=](detail::Node& self) {
    std::size_t o = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      if (double* g = detail::grad_target(self, k)) {
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < widths[k]; ++j) g[r * widths[k] + j] += self.grad[r * total + o + j];
      }
      o += widths[k];
    }
  });
}

/// Row lookup: table [V x d], ids -> [ids.size() x d].
inline Tensor gather_rows(const Tensor& table, std::vector<std::size_t> ids) {
  if (table.rank() != 2) throw ShapeError("gather_rows needs a matrix, got " + shape_str(table.shape()));
  const std::size_t vocab = table.dim(0), d = table.dim(1);
  std::vector<double> out(ids.size() * d);
  const auto in = table.values();
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= vocab) {
      throw DomainError("gather_rows: id " + std::to_string(ids[r]) + " outside table of " +
                        std::to_string(vocab) + " rows");
    }
    std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(ids[r] * d), d, out.begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  const std::size_t n = ids.size();
  return detail::make_result({n, d}, std::move(out), {table}, [ids = std::move(ids), d](detail::Node& self) {
    if (double* g = detail::grad_target(self, 0)) {
      for (std::size_t r = 0; r < ids.size(); ++r)
        for (std::size_t j = 0; j < d; ++j) g[ids[r] * d + j] += self.grad[r * d + j];
    }
  });
}

// ---------------------------------------------------------------------------
// Linear algebra

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: cannot multiply " + shape_str(a.shape()) + " by " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  if (k > 0) detail::gemm(false, false, m, n, k, a.values().data(), b.values().data(), out.data(), false);
  return detail::make_result({m, n}, std::move(out), {a, b}, [m, k, n](detail::Node& self) {
    const double* av = self.parents[0]->value.data();
    const double* bv = self.parents[1]->value.data();
    if (double* ga = detail::grad_target(self, 0)) detail::gemm(false, true, m, k, n, self.grad.data(), bv, ga, true);
    if (double* gb = detail::grad_target(self, 1)) detail::gemm(true, false, k, n, m, av, self.grad.data(), gb, true);
  });
}

/// Batched product over a shared leading axis: [B x m x k] * [B x k x n].
/// trans_a / trans_b transpose the per-batch operand before multiplying.
inline Tensor bmm(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0)) {
    throw ShapeError("bmm: cannot multiply " + shape_str(a.shape()) + " by " + shape_str(b.shape()));
  }
  const std::size_t batch = a.dim(0);
  const std::size_t m = trans_a ? a.dim(2) : a.dim(1), k = trans_a ? a.dim(1) : a.dim(2);
  const std::size_t kb = trans_b ? b.dim(2) : b.dim(1), n = trans_b ? b.dim(1) : b.dim(2);
  if (k != kb) {
    throw ShapeError("bmm: cannot multiply " + shape_str(a.shape()) + " by " + shape_str(b.shape()));
  }
  std::vector<double> out(batch * m * n, 0.0);
  for (std::size_t i = 0; i < batch; ++i) {
    detail::gemm(trans_a, trans_b, m, n, k, a.values().data() + i * m * k, b.values().data() + i * k * n,
                 out.data() + i * m * n, false);
  }
  return detail::make_result({batch, m, n}, std::move(out), {a, b}, [=](detail::Node& self) {
    const double* av = self.parents[0]->value.data();
    const double* bv = self.parents[1]->value.data();
    double* ga = detail::grad_target(self, 0);
    double* gb = detail::grad_target(self, 1);
    for (std::size_t i = 0; i < batch; ++i) {
      const double* g = self.grad.data() + i * m * n;
      const double* ai = av + i * m * k;
      const double* bi = bv + i * k * n;
      // C = op(A) op(B): dop(A) = G op(B)^T, dop(B) = op(A)^T G.
      if (ga) {
        if (!trans_a) detail::gemm(false, !trans_b, m, k, n, g, bi, ga + i * m * k, true);
        else detail::gemm(trans_b, true, k, m, n, bi, g, ga + i * m * k, true);
      }
      if (gb) {
        if (!trans_b) detail::gemm(!trans_a, false, k, n, m, ai, g, gb + i * k * n, true);
        else detail::gemm(true, trans_a, n, k, m, g, ai, gb + i * k * n, true);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Elementwise binary

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    for (std::size_t k = 0; k < 2; ++k)
      if (double* g = detail::grad_target(self, k))
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    if (double* g = detail::grad_target(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    if (double* g = detail::grad_target(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
  });
}

/// Hadamard product.
inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    if (double* g = detail::grad_target(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bv[i];
    if (double* g = detail::grad_target(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * av[i];
  });
}

/// x + b where b's shape is a suffix of x's shape (row bias, per-batch mask).
inline Tensor add_broadcast(const Tensor& x, const Tensor& b) {
  const auto& xs = x.shape();
  const auto& bs = b.shape();
  if (bs.size() > xs.size() || !std::equal(bs.begin(), bs.end(), xs.end() - static_cast<std::ptrdiff_t>(bs.size()))) {
    throw ShapeError("add_broadcast: " + shape_str(bs) + " is not a suffix of " + shape_str(xs));
  }
  const std::size_t inner = b.numel();
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + b[i % inner];
  return detail::make_result(xs, std::move(out), {x, b}, [inner](detail::Node& self) {
    if (double* g = detail::grad_target(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    if (double* g = detail::grad_target(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % inner] += self.grad[i];
  });
}

/// out[..., i, j] = a[..., i] + b[..., j]
inline Tensor outer_sum(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "outer_sum");
  const std::size_t c = a.shape().back();
  const std::size_t rows = a.numel() / c;
  std::vector<double> out(rows * c * c);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < c; ++i)
      for (std::size_t j = 0; j < c; ++j) out[(r * c + i) * c + j] = a[r * c + i] + b[r * c + j];
  Shape shape = a.shape();
  shape.push_back(c);
  return detail::make_result(std::move(shape), std::move(out), {a, b}, [rows, c](detail::Node& self) {
    double* ga = detail::grad_target(self, 0);
    double* gb = detail::grad_target(self, 1);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t i = 0; i < c; ++i)
        for (std::size_t j = 0; j < c; ++j) {
          const double g = self.grad[(r * c + i) * c + j];
          if (ga) ga[r * c + i] += g;
          if (gb) gb[r * c + j] += g;
        }
  });
}

// ---------------------------------------------------------------------------
// Elementwise unary

namespace detail {

// f maps x -> y; df maps (x, y) -> dy/dx.
template <class F, class DF>
Tensor unary(const Tensor& x, F f, DF df) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i]);
  return make_result(x.shape(), std::move(out), {x}, [df](Node& self) {
    if (double* g = grad_target(self, 0)) {
      const auto& xv = self.parents[0]->value;
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * df(xv[i], self.value[i]);
    }
  });
}

inline double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

inline Tensor scale(const Tensor& x, double s) {
  return detail::unary(x, [s](double v) { return v * s; }, [s](double, double) { return s; });
}

inline Tensor add_scalar(const Tensor& x, double s) {
  return detail::unary(x, [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

inline Tensor sigmoid(const Tensor& x) {
  return detail::unary(x, detail::stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh(const Tensor& x) {
  return detail::unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

inline Tensor leaky_relu(const Tensor& x, double slope = 0.2) {
  return detail::unary(
      x, [slope](double v) { return v > 0 ? v : slope * v; },
      [slope](double v, double) { return v > 0 ? 1.0 : slope; });
}

/// max(x, 0); the subgradient at 0 is 0.
inline Tensor relu(const Tensor& x) {
  return detail::unary(x, [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

inline Tensor exp(const Tensor& x) {
  return detail::unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

inline Tensor log(const Tensor& x) {
  for (std::size_t i = 0; i < x.numel(); ++i) {
    if (!(x[i] > 0.0)) {
      throw DomainError("log of non-positive value " + std::to_string(x[i]) + " at index " + std::to_string(i));
    }
  }
  return detail::unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

/// x^e for x >= 0. The derivative at x = 0 is taken as 0 when e < 1
/// (including e = 0, where x^0 = 1 everywhere).
inline Tensor pow(const Tensor& x, double e) {
  for (std::size_t i = 0; i < x.numel(); ++i) {
    if (x[i] < 0.0) throw DomainError("pow of negative value " + std::to_string(x[i]));
  }
  if (e == 0.0) {
    return detail::unary(x, [](double) { return 1.0; }, [](double, double) { return 0.0; });
  }
  return detail::unary(
      x, [e](double v) { return std::pow(v, e); },
      [e](double v, double) { return (v == 0.0 && e < 1.0) ? 0.0 : e * std::pow(v, e - 1.0); });
}

/// Pass-through gradient strictly inside [lo, hi], zero outside.
inline Tensor clamp(const Tensor& x, double lo, double hi) {
  return detail::unary(
      x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

enum class Pointwise { sigmoid, leaky_relu, tanh, log, exp };

inline Tensor pointwise(const Tensor& x, Pointwise kind, double slope = 0.2) {
  switch (kind) {
    case Pointwise::sigmoid: return sigmoid(x);
    case Pointwise::leaky_relu: return leaky_relu(x, slope);
    case Pointwise::tanh: return tanh(x);
    case Pointwise::log: return log(x);
    case Pointwise::exp: return exp(x);
  }
  throw ContractError("unknown pointwise kind");
}

/// a * sigmoid(g)
inline Tensor glu(const Tensor& a, const Tensor& g) {
  detail::require_same_shape(a, g, "glu");
  return mul(a, sigmoid(g));
}

// ---------------------------------------------------------------------------
// Reductions and normalisations

inline Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return detail::make_result({}, {s}, {x}, [](detail::Node& self) {
    if (double* g = detail::grad_target(self, 0)) {
      const std::size_t n = self.parents[0]->value.size();
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
    }
  });
}

inline Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

/// Sums away the last axis.
inline Tensor sum_last(const Tensor& x) {
  const std::size_t w = x.shape().back();
  const std::size_t rows = x.numel() / w;
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < w; ++j) out[r] += x[r * w + j];
  Shape shape(x.shape().begin(), x.shape().end() - 1);
  return detail::make_result(std::move(shape), std::move(out), {x}, [rows, w](detail::Node& self) {
    if (double* g = detail::grad_target(self, 0))
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < w; ++j) g[r * w + j] += self.grad[r];
  });
}

/// Softmax over the last axis with row-max subtraction.
inline Tensor softmax_last(const Tensor& x) {
  if (x.rank() == 0) throw ShapeError("softmax on a scalar");
  const std::size_t w = x.shape().back();
  const std::size_t rows = w ? x.numel() / w : 0;
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.values().data() + r * w;
    double* o = out.data() + r * w;
    const double mx = *std::max_element(in, in + w);
    double z = 0.0;
    for (std::size_t j = 0; j < w; ++j) z += (o[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < w; ++j) o[j] /= z;
  }
  return detail::make_result(x.shape(), std::move(out), {x}, [rows, w](detail::Node& self) {
    if (double* g = detail::grad_target(self, 0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = self.value.data() + r * w;
        const double* gy = self.grad.data() + r * w;
        double dot = 0.0;
        for (std::size_t j = 0; j < w; ++j) dot += gy[j] * y[j];
        for (std::size_t j = 0; j < w; ++j) g[r * w + j] += y[j] * (gy[j] - dot);
      }
    }
  });
}

/// Normalises each last-axis vector to zero mean / unit variance (biased
/// variance, eps inside the square root), then applies gain and bias.
inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5) {
  const std::size_t d = x.shape().back();
  if (d == 0 || gain.numel() != d || bias.numel() != d) {
    throw ShapeError("layer_norm: input " + shape_str(x.shape()) + " with gain " + shape_str(gain.shape()) +
                     " and bias " + shape_str(bias.shape()));
  }
  const std::size_t rows = x.numel() / d;
  std::vector<double> xhat(x.numel()), inv_std(rows), out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.values().data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += in[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (in[j] - mu) * inv_std[r];
      out[r * d + j] = xhat[r * d + j] * gain[j] + bias[j];
    }
  }
  return detail::make_result(
      x.shape(), std::move(out), {x, gain, bias},
      [rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node& self) {
        const auto& gv = self.parents[1]->value;
        double* gx = detail::grad_target(self, 0);
        double* gg = detail::grad_target(self, 1);
        double* gb = detail::grad_target(self, 2);
        const double dd = static_cast<double>(d);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* gy = self.grad.data() + r * d;
          const double* xh = xhat.data() + r * d;
          double s1 = 0.0, s2 = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double gxh = gy[j] * gv[j];
            s1 += gxh;
            s2 += gxh * xh[j];
            if (gg) gg[j] += gy[j] * xh[j];
            if (gb) gb[j] += gy[j];
          }
          if (gx) {
            for (std::size_t j = 0; j < d; ++j) {
              const double gxh = gy[j] * gv[j];
              gx[r * d + j] += inv_std[r] / dd * (dd * gxh - s1 - xh[j] * s2);
            }
          }
        }
      });
}

/// Inverted dropout. rate == 0 or a null rng returns x unchanged.
inline Tensor dropout(const Tensor& x, double rate, std::mt19937_64* rng) {
  if (rate <= 0.0 || rng == nullptr) return x;
  if (rate >= 1.0) return mul(x, Tensor::zeros(x.shape()));
  std::bernoulli_distribution keep(1.0 - rate);
  std::vector<double> mask(x.numel());
  for (auto& m : mask) m = keep(*rng) ? 1.0 / (1.0 - rate) : 0.0;
  return mul(x, Tensor::from(x.shape(), std::move(mask)));
}

/// Zero-padded ("same") 1-D correlation along the last axis:
/// out[.., t] = bias + sum_j w[j] * x[.., t + j - (k-1)/2].
inline Tensor conv1d_same(const Tensor& x, const Tensor& w, const Tensor& bias) {
  const std::size_t len = x.shape().back();
  const std::size_t k = w.numel();
  if (k == 0 || bias.numel() != 1) {
    throw ShapeError("conv1d_same: kernel " + shape_str(w.shape()) + ", bias " + shape_str(bias.shape()));
  }
  const std::size_t rows = len ? x.numel() / len : 0;
  const auto half = static_cast<std::ptrdiff_t>((k - 1) / 2);
  const auto slen = static_cast<std::ptrdiff_t>(len);
  std::vector<double> out(x.numel(), bias[0]);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::ptrdiff_t t = 0; t < slen; ++t)
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t s = t + static_cast<std::ptrdiff_t>(j) - half;
        if (s >= 0 && s < slen) out[r * len + static_cast<std::size_t>(t)] += w[j] * x[r * len + static_cast<std::size_t>(s)];
      }
  return detail::make_result(x.shape(), std::move(out), {x, w, bias}, [=](detail::Node& self) {
    const auto& xv = self.parents[0]->value;
    const auto& wv = self.parents[1]->value;
    double* gx = detail::grad_target(self, 0);
    double* gw = detail::grad_target(self, 1);
    double* gb = detail::grad_target(self, 2);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::ptrdiff_t t = 0; t < slen; ++t) {
        const double g = self.grad[r * len + static_cast<std::size_t>(t)];
        if (gb) gb[0] += g;
        for (std::size_t j = 0; j < k; ++j) {
          const std::ptrdiff_t s = t + static_cast<std::ptrdiff_t>(j) - half;
          if (s < 0 || s >= slen) continue;
          const std::size_t si = r * len + static_cast<std::size_t>(s);
          if (gx) gx[si] += g * wv[j];
          if (gw) gw[j] += g * xv[si];
        }
      }
  });
}

}  // namespace grassnet
