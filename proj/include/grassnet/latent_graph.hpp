// SPDX-License-Identifier: Apache-2.0
//
// Latent sensor graph: a shared scalar-input GRU summarises every sensor's
// series, and scaled dot-product attention over the final hidden states
// yields a row-stochastic sensor adjacency.
#pragma once

#include <cmath>
#include <string>

#include "grassnet/init.hpp"
#include "grassnet/tensor.hpp"

namespace grassnet {

struct GruParams {
  std::size_t input_dim = 1;
  std::size_t hidden_dim = 64;
  // update gate
  Tensor w_z, u_z, b_z;
  // reset gate
  Tensor w_r, u_r, b_r;
  // candidate
  Tensor w_h, u_h, b_h;

  static GruParams zeros(std::size_t input_dim, std::size_t hidden_dim) {
    GruParams p;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    for (Tensor* w : {&p.w_z, &p.w_r, &p.w_h}) *w = zeros_param({input_dim, hidden_dim});
    for (Tensor* u : {&p.u_z, &p.u_r, &p.u_h}) *u = zeros_param({hidden_dim, hidden_dim});
    for (Tensor* b : {&p.b_z, &p.b_r, &p.b_h}) *b = zeros_param({hidden_dim});
    return p;
  }

  static GruParams glorot(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
    GruParams p = zeros(input_dim, hidden_dim);
    for (Tensor* w : {&p.w_z, &p.w_r, &p.w_h}) *w = grassnet::glorot(input_dim, hidden_dim, rng);
    for (Tensor* u : {&p.u_z, &p.u_r, &p.u_h}) *u = grassnet::glorot(hidden_dim, hidden_dim, rng);
    return p;
  }

  void collect(const std::string& prefix, ParamList& out) const {
    out.insert(out.end(), {{prefix + "w_z", w_z}, {prefix + "u_z", u_z}, {prefix + "b_z", b_z},
                           {prefix + "w_r", w_r}, {prefix + "u_r", u_r}, {prefix + "b_r", b_r},
                           {prefix + "w_h", w_h}, {prefix + "u_h", u_h}, {prefix + "b_h", b_h}});
  }
};

/// One GRU step on a batch of rows: x [R x input_dim], h [R x hidden_dim].
///   z  = sigmoid(x W_z + h U_z + b_z)
///   r  = sigmoid(x W_r + h U_r + b_r)
///   h~ = tanh(x W_h + (r * h) U_h + b_h)
///   h' = (1 - z) * h + z * h~
inline Tensor gru_cell(const Tensor& x, const Tensor& h, const GruParams& p) {
  const Tensor z = sigmoid(add_broadcast(add(matmul(x, p.w_z), matmul(h, p.u_z)), p.b_z));
  const Tensor r = sigmoid(add_broadcast(add(matmul(x, p.w_r), matmul(h, p.u_r)), p.b_r));
  const Tensor cand = tanh(add_broadcast(add(matmul(x, p.w_h), matmul(mul(r, h), p.u_h)), p.b_h));
  return add(h, mul(z, sub(cand, h)));
}

/// Runs the GRU over every row of series [R x T] (one scalar per step, zero
/// initial state) and returns the last hidden state per row, [R x hidden].
inline Tensor gru_encode(const Tensor& series, const GruParams& p) {
  if (series.rank() != 2) throw ShapeError("gru_encode expects [rows x steps], got " + shape_str(series.shape()));
  if (p.input_dim != 1) throw ShapeError("gru_encode feeds one scalar per step; input_dim must be 1");
  const std::size_t steps = series.dim(1);
  if (steps == 0) throw ShapeError("gru_encode: empty sequence");
  Tensor h = Tensor::zeros({series.dim(0), p.hidden_dim});
  for (std::size_t t = 0; t < steps; ++t) h = gru_cell(slice_last(series, t, 1), h, p);
  return h;
}

struct LatentGraphParams {
  std::size_t key_dim = 64;
  Tensor w_query;  // [hidden x key_dim]
  Tensor w_key;    // [hidden x key_dim]

  static LatentGraphParams glorot(std::size_t hidden_dim, std::size_t key_dim, Rng& rng) {
    return {key_dim, grassnet::glorot(hidden_dim, key_dim, rng), grassnet::glorot(hidden_dim, key_dim, rng)};
  }

  void collect(const std::string& prefix, ParamList& out) const {
    out.insert(out.end(), {{prefix + "w_query", w_query}, {prefix + "w_key", w_key}});
  }
};

/// Row-stochastic N x N weights (or B x N x N for a batch).
struct SensorAdjacency {
  Tensor weights;
};

/// A = softmax_rows((h Wq)(h Wk)^T / sqrt(d_K)); h is [N x H] or [B x N x H].
inline SensorAdjacency latent_adjacency(const Tensor& h, const LatentGraphParams& p) {
  if (h.rank() != 2 && h.rank() != 3) throw ShapeError("latent_adjacency: bad input " + shape_str(h.shape()));
  const bool batched = h.rank() == 3;
  const std::size_t batch = batched ? h.dim(0) : 1;
  const std::size_t n = h.dim(h.rank() - 2), hidden = h.dim(h.rank() - 1);
  const Tensor rows = reshape(h, {batch * n, hidden});
  const Tensor q = reshape(matmul(rows, p.w_query), {batch, n, p.key_dim});
  const Tensor k = reshape(matmul(rows, p.w_key), {batch, n, p.key_dim});
  const Tensor scores = scale(bmm(q, k, false, true), 1.0 / std::sqrt(static_cast<double>(p.key_dim)));
  Tensor a = softmax_last(scores);
  if (!batched) a = reshape(a, {n, n});
  return {a};
}

}  // namespace grassnet
