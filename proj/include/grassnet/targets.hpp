// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "grassnet/errors.hpp"

namespace grassnet {

/// Row-major B x C label targets with an observation mask (1 = observed).
/// y is ignored wherever mask is 0.
struct LabeledBatchTargets {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> y;
  std::vector<double> mask;

  LabeledBatchTargets() = default;
  LabeledBatchTargets(std::size_t r, std::size_t c, std::vector<double> yv, std::vector<double> mv)
      : rows(r), cols(c), y(std::move(yv)), mask(std::move(mv)) {
    if (y.size() != r * c || mask.size() != r * c) {
      throw ShapeError("targets: expected " + std::to_string(r * c) + " entries, got y=" + std::to_string(y.size()) +
                       " mask=" + std::to_string(mask.size()));
    }
  }

  /// All entries observed.
  static LabeledBatchTargets dense(std::size_t r, std::size_t c, std::vector<double> yv) {
    return {r, c, std::move(yv), std::vector<double>(r * c, 1.0)};
  }

  bool observed(std::size_t r, std::size_t c) const { return mask[r * cols + c] != 0.0; }
  bool positive(std::size_t r, std::size_t c) const { return y[r * cols + c] != 0.0; }
};

}  // namespace grassnet
