// SPDX-License-Identifier: Apache-2.0
//
// Directed label correlation graph mined from co-occurrence counts, and the
// multi-head graph attention layer that refines per-label scores over it.
#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "grassnet/init.hpp"
#include "grassnet/targets.hpp"
#include "grassnet/tensor.hpp"

namespace grassnet {

struct CoOccurrence {
  std::size_t labels = 0;
  std::vector<std::int64_t> m;  // [C x C] joint positive counts
  std::vector<std::int64_t> n;  // [C] positive counts
};

/// Counts observed-positive pairs; masked entries never count.
inline CoOccurrence build_cooccurrence(const LabeledBatchTargets& t) {
  CoOccurrence co{t.cols, std::vector<std::int64_t>(t.cols * t.cols, 0), std::vector<std::int64_t>(t.cols, 0)};
  std::vector<std::size_t> pos;
  for (std::size_t r = 0; r < t.rows; ++r) {
    pos.clear();
    for (std::size_t c = 0; c < t.cols; ++c)
      if (t.observed(r, c) && t.positive(r, c)) pos.push_back(c);
    for (std::size_t i : pos) {
      ++co.n[i];
      for (std::size_t j : pos) ++co.m[i * t.cols + j];
    }
  }
  return co;
}

struct LabelCorrelation {
  std::size_t labels = 0;
  double tau = 0.4;
  std::vector<double> p;              // p[i*C+j] = P(l_j | l_i)
  std::vector<std::uint8_t> a_label;  // 1 iff p >= tau

  bool edge(std::size_t i, std::size_t j) const { return a_label[i * labels + j] != 0; }
};

/// p_ij = m_ij / n_i (0 when n_i = 0), then a_ij = [p_ij >= tau].
inline LabelCorrelation threshold_correlation(const CoOccurrence& co, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ContractError("threshold_correlation: tau must lie in [0,1], got " + std::to_string(tau));
  const std::size_t c = co.labels;
  LabelCorrelation out{c, tau, std::vector<double>(c * c, 0.0), std::vector<std::uint8_t>(c * c, 0)};
  for (std::size_t i = 0; i < c; ++i) {
    if (co.n[i] == 0) continue;
    for (std::size_t j = 0; j < c; ++j) {
      const double p = static_cast<double>(co.m[i * c + j]) / static_cast<double>(co.n[i]);
      out.p[i * c + j] = p;
      out.a_label[i * c + j] = p >= tau ? 1 : 0;
    }
  }
  return out;
}

inline nlohmann::json label_graph_to_json(const LabelCorrelation& corr) {
  std::vector<int> bits(corr.a_label.begin(), corr.a_label.end());
  return {{"C", corr.labels}, {"tau", corr.tau}, {"a_label", bits}};
}

/// Inverse of label_graph_to_json; conditional probabilities are not stored,
/// so p mirrors the binary matrix.
inline LabelCorrelation label_graph_from_json(const nlohmann::json& j) {
  LabelCorrelation corr;
  corr.labels = j.at("C").get<std::size_t>();
  corr.tau = j.at("tau").get<double>();
  const auto bits = j.at("a_label").get<std::vector<int>>();
  if (bits.size() != corr.labels * corr.labels) {
    throw DataError("label graph: expected " + std::to_string(corr.labels * corr.labels) + " entries, got " + std::to_string(bits.size()));
  }
  for (int b : bits) {
    if (b != 0 && b != 1) throw DataError("label graph: entries must be 0 or 1");
    corr.a_label.push_back(static_cast<std::uint8_t>(b));
    corr.p.push_back(static_cast<double>(b));
  }
  return corr;
}

inline void save_label_graph(const LabelCorrelation& corr, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path);
  os << label_graph_to_json(corr).dump(2) << '\n';
}

inline LabelCorrelation load_label_graph(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read " + path);
  return label_graph_from_json(nlohmann::json::parse(is));
}

// ---------------------------------------------------------------------------

/// Maps the fused feature to one d_label vector per label.
struct LabelProjection {
  Tensor w;  // [d x C*d_label]
  Tensor b;  // [C*d_label]
  std::size_t labels = 0;
  std::size_t label_dim = 16;

  static LabelProjection init(std::size_t d, std::size_t labels, std::size_t label_dim, Rng& rng) {
    return {glorot(d, labels * label_dim, rng), zeros_param({labels * label_dim}), labels, label_dim};
  }
  void collect(const std::string& prefix, ParamList& out) const {
    out.insert(out.end(), {{prefix + "w", w}, {prefix + "b", b}});
  }
};

/// z_att [B x d] -> label node features [B x C x d_label].
inline Tensor label_node_features(const Tensor& z_att, const LabelProjection& p) {
  const std::size_t batch = z_att.dim(0);
  return reshape(add_broadcast(matmul(z_att, p.w), p.b), {batch, p.labels, p.label_dim});
}

struct GatHead {
  Tensor w;      // [d_label x d_label]
  Tensor a_src;  // [d_label x 1], scores the attending node i
  Tensor a_dst;  // [d_label x 1], scores the neighbour j
};

struct GatParams {
  std::vector<GatHead> heads;
  Tensor w_out;  // [d_label x 1], shared across labels
  Tensor b_out;  // [C]
  double slope = 0.2;

  static GatParams init(std::size_t labels, std::size_t label_dim, std::size_t heads, Rng& rng) {
    GatParams p;
    for (std::size_t k = 0; k < heads; ++k) {
      p.heads.push_back({glorot(label_dim, label_dim, rng), glorot(label_dim, 1, rng), glorot(label_dim, 1, rng)});
    }
    p.w_out = glorot(label_dim, 1, rng);
    p.b_out = zeros_param({labels});
    return p;
  }

  void collect(const std::string& prefix, ParamList& out) const {
    for (std::size_t k = 0; k < heads.size(); ++k) {
      const std::string h = prefix + "head" + std::to_string(k) + ".";
      out.insert(out.end(), {{h + "w", heads[k].w}, {h + "a_src", heads[k].a_src}, {h + "a_dst", heads[k].a_dst}});
    }
    out.insert(out.end(), {{prefix + "w_out", w_out}, {prefix + "b_out", b_out}});
  }
};

inline constexpr double kMaskedLogit = -1e9;

/// Additive [C x C] mask: 0 on edges of a_label, -1e9 elsewhere. A label
/// without outgoing edges keeps only its self-loop.
inline Tensor neighbourhood_mask(const LabelCorrelation& corr) {
  const std::size_t c = corr.labels;
  std::vector<double> m(c * c, kMaskedLogit);
  for (std::size_t i = 0; i < c; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < c; ++j)
      if (corr.edge(i, j)) {
        m[i * c + j] = 0.0;
        any = true;
      }
    if (!any) m[i * c + i] = 0.0;
  }
  return Tensor::from({c, c}, std::move(m));
}

/// Transformed features W l and attention alpha [B x C x C] for one head.
inline std::pair<Tensor, Tensor> gat_head_attention(const Tensor& features, const Tensor& mask, const GatHead& head,
                                                    double slope) {
  const std::size_t batch = features.dim(0), c = features.dim(1), dl = features.dim(2);
  const Tensor wl = matmul(reshape(features, {batch * c, dl}), head.w);
  const Tensor src = reshape(matmul(wl, head.a_src), {batch, c});
  const Tensor dst = reshape(matmul(wl, head.a_dst), {batch, c});
  const Tensor e = leaky_relu(outer_sum(src, dst), slope);
  const Tensor alpha = softmax_last(add_broadcast(e, mask));
  return {reshape(wl, {batch, c, head.w.dim(1)}), alpha};
}

/// Multi-head masked attention over the label graph, heads averaged, then a
/// shared linear map to one logit per label. features is [C x d_label]
/// (returns [C]) or [B x C x d_label] (returns [B x C]).
inline Tensor gat_forward(const Tensor& features, const LabelCorrelation& corr, const GatParams& p) {
  const bool batched = features.rank() == 3;
  if (!batched && features.rank() != 2) throw ShapeError("gat_forward: bad features " + shape_str(features.shape()));
  const Tensor f3 = batched ? features : reshape(features, {1, features.dim(0), features.dim(1)});
  const std::size_t batch = f3.dim(0), c = f3.dim(1);
  if (c != corr.labels) throw ShapeError("gat_forward: " + std::to_string(c) + " label nodes vs graph of " + std::to_string(corr.labels));
  if (p.heads.empty()) throw ShapeError("gat_forward needs at least one head");
  const Tensor mask = neighbourhood_mask(corr);
  Tensor acc;
  for (const auto& head : p.heads) {
    const auto [wl, alpha] = gat_head_attention(f3, mask, head, p.slope);
    const Tensor agg = bmm(alpha, wl);
    acc = acc.defined() ? add(acc, agg) : agg;
  }
  acc = scale(acc, 1.0 / static_cast<double>(p.heads.size()));
  const std::size_t dl = acc.dim(2);
  const Tensor logits = add_broadcast(reshape(matmul(reshape(acc, {batch * c, dl}), p.w_out), {batch, c}), p.b_out);
  return batched ? logits : reshape(logits, {c});
}

}  // namespace grassnet
