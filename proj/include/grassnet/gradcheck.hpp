// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include "grassnet/tensor.hpp"

namespace grassnet {

struct GradCheckOptions {
  double step = 1e-5;
  // 0 checks every entry; otherwise a seeded random subset of this size.
  std::size_t max_entries = 0;
  std::uint64_t seed = 0;
  // Denominator floor so gradients that are zero on both sides compare as
  // absolute differences instead of 0/0.
  double floor = 1e-6;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Compares reverse-mode gradients of the scalar f() with respect to params
/// against central differences. f must rebuild its graph on every call.
inline GradCheckResult grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                                  const GradCheckOptions& opt = {}) {
  for (auto& p : params) p.zero_grad();
  const Tensor loss = f();
  loss.backward();

  std::vector<std::pair<std::size_t, std::size_t>> entries;
  for (std::size_t p = 0; p < params.size(); ++p)
    for (std::size_t i = 0; i < params[p].numel(); ++i) entries.emplace_back(p, i);
  if (opt.max_entries != 0 && entries.size() > opt.max_entries) {
    std::mt19937_64 rng(opt.seed);
    std::shuffle(entries.begin(), entries.end(), rng);
    entries.resize(opt.max_entries);
  }

  GradCheckResult res;
  for (const auto& [p, i] : entries) {
    const double analytic = params[p].has_grad() ? params[p].grad()[i] : 0.0;
    auto vals = params[p].mutable_values();
    const double orig = vals[i];
    vals[i] = orig + opt.step;
    const double up = f().item();
    vals[i] = orig - opt.step;
    const double down = f().item();
    vals[i] = orig;
    const double numeric = (up - down) / (2.0 * opt.step);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), opt.floor});
    res.max_rel_error = std::max(res.max_rel_error, std::abs(analytic - numeric) / denom);
    ++res.checked;
  }
  for (auto& p : params) p.zero_grad();
  return res;
}

}  // namespace grassnet
