// SPDX-License-Identifier: Apache-2.0
//
// Spectral primitives: discrete Fourier transform over the last axis and
// the symmetric eigendecomposition used to build graph Fourier bases.
#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Eigenvalues>

#include "grassnet/tensor.hpp"

namespace grassnet {

struct ComplexPair {
  Tensor re;
  Tensor im;
};

namespace detail {

// cos/sin kernels K[t][k] = cos(2*pi*k*t/T), sin(...). Both are symmetric.
inline std::pair<Tensor, Tensor> dft_kernels(std::size_t len) {
  std::vector<double> c(len * len), s(len * len);
  for (std::size_t t = 0; t < len; ++t)
    for (std::size_t k = 0; k < len; ++k) {
      // Reduce k*t mod T first so large T keeps the angle small and exact.
      const double ang = 2.0 * std::numbers::pi * static_cast<double>((k * t) % len) / static_cast<double>(len);
      c[t * len + k] = std::cos(ang);
      s[t * len + k] = std::sin(ang);
    }
  return {Tensor::from({len, len}, std::move(c)), Tensor::from({len, len}, std::move(s))};
}

inline Tensor as_rows(const Tensor& x) {
  const std::size_t len = x.shape().back();
  return reshape(x, {x.numel() / len, len});
}

}  // namespace detail

/// DFT along the last axis of every row.
/// Forward: X_k = sum_t x_t e^{-2 pi i k t / T}. Inverse uses the conjugate
/// kernel and a 1/T scale. Differentiable in both parts.
inline ComplexPair dft(const ComplexPair& x, bool inverse) {
  detail::require_same_shape(x.re, x.im, "dft");
  if (x.re.rank() == 0 || x.re.shape().back() == 0) throw ShapeError("dft needs T >= 1");
  const std::size_t len = x.re.shape().back();
  const auto [c, s] = detail::dft_kernels(len);
  const Tensor re = detail::as_rows(x.re);
  const Tensor im = detail::as_rows(x.im);
  Tensor out_re, out_im;
  if (!inverse) {
    out_re = add(matmul(re, c), matmul(im, s));
    out_im = sub(matmul(im, c), matmul(re, s));
  } else {
    const double inv = 1.0 / static_cast<double>(len);
    out_re = scale(sub(matmul(re, c), matmul(im, s)), inv);
    out_im = scale(add(matmul(im, c), matmul(re, s)), inv);
  }
  return {reshape(out_re, x.re.shape()), reshape(out_im, x.re.shape())};
}

/// Forward DFT of a real signal.
inline ComplexPair dft_real(const Tensor& x) { return dft({x, Tensor::zeros(x.shape())}, false); }

struct EigenDecomposition {
  Tensor eigenvalues;   // [N], ascending
  Tensor eigenvectors;  // [N x N], column i pairs with eigenvalues[i]
};

/// Full eigendecomposition of a symmetric matrix. Each eigenvector's
/// largest-magnitude component is made positive (first one wins on ties),
/// so the basis is reproducible. Not differentiable.
inline EigenDecomposition sym_eig(const Tensor& a, double symmetry_tol = 1e-10) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1)) throw ShapeError("sym_eig needs a square matrix, got " + shape_str(a.shape()));
  const std::size_t n = a.dim(0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(a.at(i, j) - a.at(j, i)) > symmetry_tol) {
        throw ContractError("sym_eig: matrix is not symmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
  if (n == 0) return {Tensor::zeros({0}), Tensor::zeros({0, 0})};

  Eigen::Map<const detail::RowMat> m(a.values().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(Eigen::MatrixXd(m), Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw DomainError("sym_eig: eigensolver did not converge");

  std::vector<double> vals(n), vecs(n * n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto ek = static_cast<Eigen::Index>(k);
    vals[k] = solver.eigenvalues()(ek);
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < static_cast<Eigen::Index>(n); ++i)
      if (std::abs(solver.eigenvectors()(i, ek)) > std::abs(solver.eigenvectors()(best, ek)) + 1e-12) best = i;
    const double sign = solver.eigenvectors()(best, ek) < 0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) vecs[i * n + k] = sign * solver.eigenvectors()(static_cast<Eigen::Index>(i), ek);
  }
  return {Tensor::from({n}, std::move(vals)), Tensor::from({n, n}, std::move(vecs))};
}

}  // namespace grassnet
