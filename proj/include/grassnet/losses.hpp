// SPDX-License-Identifier: Apache-2.0
//
// Mask-aware imbalance losses over sigmoid probabilities and the
// pseudo-label term for unlabeled entries.
#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "grassnet/targets.hpp"
#include "grassnet/tensor.hpp"

namespace grassnet {

enum class LossMode { bce, focal, asymmetric };

inline const char* to_string(LossMode m) {
  switch (m) {
    case LossMode::bce: return "bce";
    case LossMode::focal: return "focal";
    case LossMode::asymmetric: return "asymmetric";
  }
  return "?";
}

inline LossMode loss_mode_from_string(const std::string& s) {
  if (s == "bce") return LossMode::bce;
  if (s == "focal") return LossMode::focal;
  if (s == "asymmetric") return LossMode::asymmetric;
  throw ContractError("unknown loss mode '" + s + "' (expected bce, focal or asymmetric)");
}

struct LossConfig {
  LossMode mode = LossMode::focal;
  double gamma_pos = 2.0;
  double gamma_neg = 2.0;
  double margin = 0.0;
  double pseudo_threshold = 0.95;
  // Also pseudo-label confident negatives: keep max(p, 1-p) > threshold
  // with target round(p).
  bool symmetric_pseudo = false;

  static LossConfig bce() { return {LossMode::bce, 0.0, 0.0, 0.0}; }
  static LossConfig focal(double gamma = 2.0) { return {LossMode::focal, gamma, gamma, 0.0}; }
  static LossConfig asymmetric(double gamma_neg = 2.0, double margin = 0.05) {
    return {LossMode::asymmetric, 0.0, gamma_neg, margin};
  }

  void validate() const {
    if (gamma_pos < 0 || gamma_neg < 0) throw ContractError("loss: focusing parameters must be non-negative");
    if (!(margin >= 0 && margin < 1)) throw ContractError("loss: margin must lie in [0,1)");
    if (!(pseudo_threshold > 0.5 && pseudo_threshold <= 1)) throw ContractError("loss: pseudo_threshold must lie in (0.5,1]");
    if (mode == LossMode::bce && (gamma_pos != 0 || gamma_neg != 0 || margin != 0)) {
      throw ContractError("loss: bce mode requires gamma_pos = gamma_neg = margin = 0");
    }
  }
};

inline constexpr double kProbClamp = 1e-7;

/// Mean over observed entries of
///   y = 1: (1-p)^g+ * -log p
///   y = 0: pm^g- * -log(1-pm), pm = max(p - m, 0)
/// p is [B x C] probabilities. Zero when nothing is observed.
inline Tensor supervised_loss(const Tensor& p, const LabeledBatchTargets& t, const LossConfig& cfg) {
  if (p.numel() != t.rows * t.cols) {
    throw ShapeError("supervised_loss: " + shape_str(p.shape()) + " probabilities vs " + std::to_string(t.rows) + "x" +
                     std::to_string(t.cols) + " targets");
  }
  double observed = 0.0;
  std::vector<double> pos_w(p.numel()), neg_w(p.numel());
  for (std::size_t i = 0; i < p.numel(); ++i) {
    const double m = t.mask[i] != 0.0 ? 1.0 : 0.0;
    const double y = t.y[i] != 0.0 ? 1.0 : 0.0;
    observed += m;
    pos_w[i] = m * y;
    neg_w[i] = m * (1.0 - y);
  }
  if (observed == 0.0) return mul(sum(p), Tensor::scalar(0.0));

  const Tensor pc = clamp(p, kProbClamp, 1.0 - kProbClamp);
  const Tensor one_minus_p = add_scalar(scale(pc, -1.0), 1.0);
  const Tensor pos = mul(pow(one_minus_p, cfg.gamma_pos), scale(log(pc), -1.0));

  const Tensor shifted = cfg.margin > 0.0 ? relu(add_scalar(pc, -cfg.margin)) : pc;
  const Tensor one_minus_shifted = add_scalar(scale(shifted, -1.0), 1.0);
  const Tensor neg = mul(pow(shifted, cfg.gamma_neg), scale(log(one_minus_shifted), -1.0));

  const Tensor total = add(mul(pos, Tensor::from(p.shape(), std::move(pos_w))),
                           mul(neg, Tensor::from(p.shape(), std::move(neg_w))));
  return scale(sum(total), 1.0 / observed);
}

/// Pseudo-label cross-entropy over the entries selected by `pool` (1 = the
/// entry has no ground truth). Entries whose probability clears the
/// threshold get the hard label; the mean is over retained entries and is 0
/// when none are retained. Targets carry no gradient.
inline Tensor unlabeled_loss(const Tensor& p, const std::vector<double>& pool, const LossConfig& cfg) {
  if (pool.size() != p.numel()) throw ShapeError("unlabeled_loss: pool size does not match probabilities");
  std::vector<double> take_pos(p.numel(), 0.0), take_neg(p.numel(), 0.0);
  double retained = 0.0;
  for (std::size_t i = 0; i < p.numel(); ++i) {
    if (pool[i] == 0.0) continue;
    if (p[i] > cfg.pseudo_threshold) {
      take_pos[i] = 1.0;
      retained += 1.0;
    } else if (cfg.symmetric_pseudo && 1.0 - p[i] > cfg.pseudo_threshold) {
      take_neg[i] = 1.0;
      retained += 1.0;
    }
  }
  if (retained == 0.0) return mul(sum(p), Tensor::scalar(0.0));
  const Tensor pc = clamp(p, kProbClamp, 1.0 - kProbClamp);
  Tensor total = mul(scale(log(pc), -1.0), Tensor::from(p.shape(), std::move(take_pos)));
  if (cfg.symmetric_pseudo) {
    const Tensor neg = scale(log(add_scalar(scale(pc, -1.0), 1.0)), -1.0);
    total = add(total, mul(neg, Tensor::from(p.shape(), std::move(take_neg))));
  }
  return scale(sum(total), 1.0 / retained);
}

/// Convenience: every unobserved entry of t is in the pseudo-label pool.
inline Tensor unlabeled_loss(const Tensor& p, const LabeledBatchTargets& t, const LossConfig& cfg) {
  std::vector<double> pool(t.mask.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = t.mask[i] == 0.0 ? 1.0 : 0.0;
  return unlabeled_loss(p, pool, cfg);
}

inline Tensor total_loss(const Tensor& supervised, const Tensor& unlabeled) { return add(supervised, unlabeled); }

}  // namespace grassnet
