// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "grassnet/tensor.hpp"

namespace grassnet {

/// Parameters keyed by module path, in registration order.
using ParamList = std::vector<std::pair<std::string, Tensor>>;

using Rng = std::mt19937_64;

/// Uniform Glorot initialisation for a fan_in x fan_out matrix.
inline Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> v(fan_in * fan_out);
  for (auto& x : v) x = dist(rng);
  return Tensor::from({fan_in, fan_out}, std::move(v), true);
}

inline Tensor normal_init(Shape shape, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(detail::numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v), true);
}

inline Tensor zeros_param(Shape shape) { return Tensor::zeros(std::move(shape), true); }

}  // namespace grassnet
