// SPDX-License-Identifier: Apache-2.0
//
// Spectral graph convolution over the learned sensor graph: normalized
// Laplacian and its eigenbasis, graph Fourier transforms, the first-order
// Chebyshev cell, the joint graph/time-frequency convolution block and the
// fully-connected head that turns node spectra into sensor features.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "grassnet/init.hpp"
#include "grassnet/latent_graph.hpp"
#include "grassnet/spectral.hpp"
#include "grassnet/tensor.hpp"

namespace grassnet {

struct GraphSpectrum {
  Tensor laplacian;  // [N x N], symmetric
  EigenDecomposition basis;
};

/// L = I - D^{-1/2} A_sym D^{-1/2} with A_sym = (A + A^T)/2 and 0^{-1/2} = 0.
/// Values only; the spectrum is treated as a constant per batch.
inline GraphSpectrum normalized_laplacian(const Tensor& adjacency) {
  if (adjacency.rank() != 2 || adjacency.dim(0) != adjacency.dim(1)) {
    throw ShapeError("normalized_laplacian needs N x N, got " + shape_str(adjacency.shape()));
  }
  const std::size_t n = adjacency.dim(0);
  std::vector<double> sym(n * n), inv_sqrt_deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) sym[i * n + j] = 0.5 * (adjacency.at(i, j) + adjacency.at(j, i));
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += sym[i * n + j];
    inv_sqrt_deg[i] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  std::vector<double> lap(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      lap[i * n + j] = (i == j ? 1.0 : 0.0) - inv_sqrt_deg[i] * sym[i * n + j] * inv_sqrt_deg[j];
  // Exact symmetry for the eigensolver's contract.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) lap[j * n + i] = lap[i * n + j];
  Tensor l = Tensor::from({n, n}, std::move(lap));
  auto basis = sym_eig(l);
  return {l, std::move(basis)};
}

inline GraphSpectrum normalized_laplacian(const SensorAdjacency& a) { return normalized_laplacian(a.weights); }

/// Stacks the eigenvector bases of a batch of adjacencies [B x N x N] into a
/// constant [B x N x N] tensor.
inline Tensor batch_graph_basis(const Tensor& adjacency) {
  if (adjacency.rank() != 3) throw ShapeError("batch_graph_basis needs [B x N x N]");
  const std::size_t batch = adjacency.dim(0), n = adjacency.dim(1);
  std::vector<double> out(batch * n * n);
  const auto vals = adjacency.values();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (!std::isfinite(vals[i])) throw DivergenceError("non-finite sensor adjacency in batch sample " + std::to_string(i / (n * n)));
  }
  for (std::size_t b = 0; b < batch; ++b) {
    const Tensor a = Tensor::from({n, n}, std::vector<double>(vals.begin() + static_cast<std::ptrdiff_t>(b * n * n),
                                                              vals.begin() + static_cast<std::ptrdiff_t>((b + 1) * n * n)));
    const auto spec = normalized_laplacian(a);
    std::copy(spec.basis.eigenvectors.values().begin(), spec.basis.eigenvectors.values().end(),
              out.begin() + static_cast<std::ptrdiff_t>(b * n * n));
  }
  return Tensor::from({batch, n, n}, std::move(out));
}

/// Graph Fourier transform along the node axis. basis is U as [N x N] (x is
/// [N x F]) or [B x N x N] (x is [B x N x F]). Forward is U^T x, inverse U x.
inline Tensor gft(const Tensor& x, const Tensor& basis, bool inverse) {
  if (basis.rank() == 2) {
    if (x.rank() != 2 || x.dim(0) != basis.dim(0)) {
      throw ShapeError("gft: signal " + shape_str(x.shape()) + " vs basis " + shape_str(basis.shape()));
    }
    return matmul(inverse ? basis : transpose(basis), x);
  }
  if (x.rank() != 3 || x.dim(0) != basis.dim(0) || x.dim(1) != basis.dim(1)) {
    throw ShapeError("gft: signal " + shape_str(x.shape()) + " vs basis " + shape_str(basis.shape()));
  }
  return bmm(basis, x, !inverse, false);
}

inline Tensor gft(const Tensor& x, const EigenDecomposition& basis, bool inverse) {
  return gft(x, basis.eigenvectors, inverse);
}

struct ChebGcnParams {
  Tensor theta;  // [F_in x F_out]

  static ChebGcnParams glorot(std::size_t in, std::size_t out, Rng& rng) { return {grassnet::glorot(in, out, rng)}; }
  void collect(const std::string& prefix, ParamList& out) const { out.emplace_back(prefix + "theta", theta); }
};

/// D~^{-1/2} A~ D~^{-1/2} with A~ = (A + A^T)/2 + I; differentiable in A.
/// Accepts [N x N] or [B x N x N].
inline Tensor renormalized_adjacency(const Tensor& a) {
  const bool batched = a.rank() == 3;
  const std::size_t n = a.dim(a.rank() - 1);
  const std::size_t batch = batched ? a.dim(0) : 1;
  const Tensor a3 = reshape(a, {batch, n, n});
  const Tensor tilde = add_broadcast(scale(add(a3, transpose(a3)), 0.5), Tensor::eye(n));
  const Tensor inv_sqrt = pow(sum_last(tilde), -0.5);  // degrees >= 1
  const Tensor col = reshape(inv_sqrt, {batch, n, 1});
  const Tensor outer = bmm(col, col, false, true);
  Tensor out = mul(tilde, outer);
  return batched ? out : reshape(out, {n, n});
}

/// First-order Chebyshev graph convolution, sigmoid(A_hat X Theta).
/// x is [N x F] or [B x N x F].
inline Tensor cheb_gcn_cell(const Tensor& x, const SensorAdjacency& a, const ChebGcnParams& p) {
  const Tensor norm = renormalized_adjacency(a.weights);
  const std::size_t f_in = x.shape().back(), f_out = p.theta.dim(1);
  if (p.theta.dim(0) != f_in) throw ShapeError("cheb_gcn_cell: theta " + shape_str(p.theta.shape()) + " vs input " + shape_str(x.shape()));
  if (x.rank() == 2) return sigmoid(matmul(matmul(norm, x), p.theta));
  const std::size_t batch = x.dim(0), n = x.dim(1);
  const Tensor mixed = reshape(bmm(norm, x), {batch * n, f_in});
  return reshape(sigmoid(matmul(mixed, p.theta)), {batch, n, f_out});
}

enum class ChannelCombine { sum, concat };

/// One convolution channel: (value, gate) kernels for the real and the
/// imaginary spectrum, all of width kernel_width with a scalar bias.
struct SpectralChannel {
  Tensor re_value, re_value_bias, re_gate, re_gate_bias;
  Tensor im_value, im_value_bias, im_gate, im_gate_bias;
};

struct SpectralConvParams {
  std::size_t kernel_width = 3;
  ChannelCombine combine = ChannelCombine::sum;
  std::vector<SpectralChannel> channels;

  static SpectralConvParams init(std::size_t channels, std::size_t kernel_width, ChannelCombine combine, Rng& rng) {
    SpectralConvParams p{kernel_width, combine, {}};
    std::uniform_real_distribution<double> dist(-1.0 / std::sqrt(double(kernel_width)), 1.0 / std::sqrt(double(kernel_width)));
    auto kernel = [&] {
      std::vector<double> v(kernel_width);
      for (auto& x : v) x = dist(rng);
      return Tensor::from({kernel_width}, std::move(v), true);
    };
    for (std::size_t c = 0; c < channels; ++c) {
      SpectralChannel ch;
      ch.re_value = kernel();
      ch.re_value_bias = zeros_param({1});
      ch.re_gate = kernel();
      ch.re_gate_bias = zeros_param({1});
      ch.im_value = kernel();
      ch.im_value_bias = zeros_param({1});
      ch.im_gate = kernel();
      ch.im_gate_bias = zeros_param({1});
      p.channels.push_back(std::move(ch));
    }
    return p;
  }

  std::size_t output_width(std::size_t steps) const {
    return combine == ChannelCombine::sum ? steps : steps * channels.size();
  }

  void collect(const std::string& prefix, ParamList& out) const {
    for (std::size_t c = 0; c < channels.size(); ++c) {
      const auto& ch = channels[c];
      const std::string p = prefix + "ch" + std::to_string(c) + ".";
      out.insert(out.end(), {{p + "re_value", ch.re_value}, {p + "re_value_bias", ch.re_value_bias},
                             {p + "re_gate", ch.re_gate}, {p + "re_gate_bias", ch.re_gate_bias},
                             {p + "im_value", ch.im_value}, {p + "im_value_bias", ch.im_value_bias},
                             {p + "im_gate", ch.im_gate}, {p + "im_gate_bias", ch.im_gate_bias}});
    }
  }
};

/// GFT over nodes, DFT over time, gated 1-D convolution of the real and
/// imaginary spectra, IDFT (real part), IGFT. x is [N x T] with basis
/// [N x N], or [B x N x T] with basis [B x N x N]. Returns [.. x N x d_spec].
inline Tensor spectral_conv(const Tensor& x, const Tensor& basis, const SpectralConvParams& p) {
  if (p.channels.empty()) throw ShapeError("spectral_conv needs at least one channel");
  if (x.shape().back() == 0) throw ShapeError("spectral_conv needs T >= 1");
  const Tensor xg = gft(x, basis, false);
  const ComplexPair freq = dft_real(xg);
  std::vector<Tensor> outs;
  for (const auto& ch : p.channels) {
    const Tensor re = glu(conv1d_same(freq.re, ch.re_value, ch.re_value_bias),
                          conv1d_same(freq.re, ch.re_gate, ch.re_gate_bias));
    const Tensor im = glu(conv1d_same(freq.im, ch.im_value, ch.im_value_bias),
                          conv1d_same(freq.im, ch.im_gate, ch.im_gate_bias));
    const Tensor time = dft({re, im}, true).re;
    outs.push_back(gft(time, basis, true));
  }
  if (p.combine == ChannelCombine::concat) return concat_last(outs);
  Tensor acc = outs[0];
  for (std::size_t c = 1; c < outs.size(); ++c) acc = add(acc, outs[c]);
  return acc;
}

inline Tensor spectral_conv(const Tensor& x, const GraphSpectrum& spectrum, const SpectralConvParams& p) {
  return spectral_conv(x, spectrum.basis.eigenvectors, p);
}

struct FcHeadParams {
  Tensor ln_gain, ln_bias;  // [d_in]
  Tensor w1, b1;            // [d_in x d], [d]
  Tensor w2, b2;            // [d x d], [d]
  double dropout = 0.2;
  double slope = 0.2;
  double eps = 1e-5;

  static FcHeadParams init(std::size_t d_in, std::size_t d, double dropout, Rng& rng) {
    FcHeadParams p;
    p.ln_gain = Tensor::full({d_in}, 1.0, true);
    p.ln_bias = zeros_param({d_in});
    p.w1 = grassnet::glorot(d_in, d, rng);
    p.b1 = zeros_param({d});
    p.w2 = grassnet::glorot(d, d, rng);
    p.b2 = zeros_param({d});
    p.dropout = dropout;
    return p;
  }

  void collect(const std::string& prefix, ParamList& out) const {
    out.insert(out.end(), {{prefix + "ln_gain", ln_gain}, {prefix + "ln_bias", ln_bias}, {prefix + "w1", w1},
                           {prefix + "b1", b1}, {prefix + "w2", w2}, {prefix + "b2", b2}});
  }
};

/// layer norm -> leaky relu -> dropout -> linear -> linear, over the last
/// axis. Dropout only runs when training and rng is given.
inline Tensor fc_head(const Tensor& h, const FcHeadParams& p, bool training, Rng* rng = nullptr) {
  const std::size_t d_in = h.shape().back();
  if (p.ln_gain.numel() != d_in) throw ShapeError("fc_head: input width " + std::to_string(d_in) + " vs layer norm " + shape_str(p.ln_gain.shape()));
  Shape out_shape = h.shape();
  out_shape.back() = p.w2.dim(1);
  Tensor x = reshape(h, {h.numel() / d_in, d_in});
  x = layer_norm(x, p.ln_gain, p.ln_bias, p.eps);
  x = leaky_relu(x, p.slope);
  x = dropout(x, training ? p.dropout : 0.0, rng);
  x = add_broadcast(matmul(x, p.w1), p.b1);
  x = add_broadcast(matmul(x, p.w2), p.b2);
  return reshape(x, std::move(out_shape));
}

}  // namespace grassnet
