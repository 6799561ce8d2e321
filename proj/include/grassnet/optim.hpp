// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "grassnet/tensor.hpp"

namespace grassnet {

struct RmsPropConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  double rho = 0.9;
  double eps = 1e-8;
};

/// Running mean of squared gradients, one buffer per parameter.
struct RmsPropState {
  std::vector<std::vector<double>> square_avg;
};

/// g = grad + wd * w;  v = rho v + (1 - rho) g^2;  w -= lr g / (sqrt(v) + eps).
/// Parameters without a gradient are treated as having a zero gradient.
inline void rmsprop_step(std::vector<Tensor>& params, RmsPropState& state, const RmsPropConfig& cfg) {
  if (state.square_avg.size() != params.size()) {
    state.square_avg.resize(params.size());
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto w = params[p].mutable_values();
    auto& v = state.square_avg[p];
    if (v.size() != w.size()) {
      if (!v.empty()) throw ShapeError("rmsprop_step: optimizer state does not match parameter " + std::to_string(p));
      v.assign(w.size(), 0.0);
    }
    const auto g = params[p].grad();
    const bool has = g.size() == w.size();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = (has ? g[i] : 0.0) + cfg.weight_decay * w[i];
      v[i] = cfg.rho * v[i] + (1.0 - cfg.rho) * gi * gi;
      w[i] -= cfg.learning_rate * gi / (std::sqrt(v[i]) + cfg.eps);
    }
  }
}

}  // namespace grassnet
