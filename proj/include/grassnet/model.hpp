// SPDX-License-Identifier: Apache-2.0
//
// The full classifier: latent sensor graph -> spectral graph convolution ->
// FC head (sensor tokens) -> text attention fusion -> label graph attention.
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "grassnet/data.hpp"
#include "grassnet/init.hpp"
#include "grassnet/label_graph.hpp"
#include "grassnet/latent_graph.hpp"
#include "grassnet/spectral_gcn.hpp"
#include "grassnet/text_fusion.hpp"

namespace grassnet {

struct ModelConfig {
  std::size_t sensors = 0;
  std::size_t steps = 2;
  std::size_t labels = 0;
  std::size_t fields = 0;
  std::size_t vocab_size = 0;

  std::size_t hidden_dim = 64;
  std::size_t key_dim = 64;
  std::size_t spectral_channels = 4;
  std::size_t kernel_width = 3;
  ChannelCombine combine = ChannelCombine::sum;
  bool use_cheb_gcn = false;
  std::size_t feature_dim = 64;
  std::size_t embed_dim = 16;
  std::size_t label_dim = 16;
  std::size_t gat_heads = 2;
  double dropout = 0.2;
  double slope = 0.2;

  std::size_t spectral_width() const { return combine == ChannelCombine::sum ? steps : steps * spectral_channels; }
};

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"sensors", c.sensors}, {"steps", c.steps}, {"labels", c.labels}, {"fields", c.fields},
          {"vocab_size", c.vocab_size}, {"hidden_dim", c.hidden_dim}, {"key_dim", c.key_dim},
          {"spectral_channels", c.spectral_channels}, {"kernel_width", c.kernel_width},
          {"channel_combine", c.combine == ChannelCombine::sum ? "sum" : "concat"}, {"use_cheb_gcn", c.use_cheb_gcn},
          {"feature_dim", c.feature_dim}, {"embed_dim", c.embed_dim}, {"label_dim", c.label_dim},
          {"gat_heads", c.gat_heads}, {"dropout", c.dropout}, {"slope", c.slope}};
}

inline ChannelCombine channel_combine_from_string(const std::string& s) {
  if (s == "sum") return ChannelCombine::sum;
  if (s == "concat") return ChannelCombine::concat;
  throw ContractError("unknown channel_combine '" + s + "' (expected sum or concat)");
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.sensors = j.at("sensors");
  c.steps = j.at("steps");
  c.labels = j.at("labels");
  c.fields = j.at("fields");
  c.vocab_size = j.at("vocab_size");
  c.hidden_dim = j.at("hidden_dim");
  c.key_dim = j.at("key_dim");
  c.spectral_channels = j.at("spectral_channels");
  c.kernel_width = j.at("kernel_width");
  c.combine = channel_combine_from_string(j.at("channel_combine").get<std::string>());
  c.use_cheb_gcn = j.at("use_cheb_gcn");
  c.feature_dim = j.at("feature_dim");
  c.embed_dim = j.at("embed_dim");
  c.label_dim = j.at("label_dim");
  c.gat_heads = j.at("gat_heads");
  c.dropout = j.at("dropout");
  c.slope = j.at("slope");
  return c;
}

/// A batch of padded samples: series [B x N x T], tokens [B x fields].
struct Batch {
  std::size_t size = 0;
  Tensor series;
  std::vector<std::size_t> tokens;
  LabeledBatchTargets targets;
};

inline Batch make_batch(const Dataset& ds, std::span<const std::size_t> indices) {
  const auto& sc = ds.schema;
  const std::size_t n = sc.sensors(), t = sc.max_steps, c = sc.labels();
  Batch b;
  b.size = indices.size();
  std::vector<double> series;
  series.reserve(b.size * n * t);
  std::vector<double> y, m;
  for (std::size_t i : indices) {
    const auto& s = ds.samples.at(i);
    series.insert(series.end(), s.series.begin(), s.series.end());
    b.tokens.insert(b.tokens.end(), s.tokens.begin(), s.tokens.end());
    y.insert(y.end(), s.y.begin(), s.y.end());
    m.insert(m.end(), s.mask.begin(), s.mask.end());
  }
  b.series = Tensor::from({b.size, n, t}, std::move(series));
  b.targets = LabeledBatchTargets(b.size, c, std::move(y), std::move(m));
  return b;
}

struct ForwardResult {
  Tensor adjacency;  // [B x N x N]
  Tensor basis;      // [B x N x N], constant
  Tensor sensor_tokens;  // [B x N x d]
  Tensor attention;  // [B x N]
  Tensor logits;     // [B x C]
  Tensor probs;      // [B x C]
};

struct GraSSNet {
  ModelConfig config;
  GruParams gru;
  LatentGraphParams latent;
  SpectralConvParams spectral;
  ChebGcnParams cheb;
  FcHeadParams fc;
  EmbeddingTable text;
  LabelProjection label_proj;
  GatParams gat;
  LabelCorrelation label_graph;

  /// Glorot matrices, zero biases, N(0, 0.01^2) embeddings. The label graph
  /// starts as self-loops only until set from training labels.
  static GraSSNet init(const ModelConfig& cfg, Rng& rng) {
    GraSSNet m;
    m.config = cfg;
    m.gru = GruParams::glorot(1, cfg.hidden_dim, rng);
    m.latent = LatentGraphParams::glorot(cfg.hidden_dim, cfg.key_dim, rng);
    m.spectral = SpectralConvParams::init(cfg.spectral_channels, cfg.kernel_width, cfg.combine, rng);
    m.cheb = ChebGcnParams::glorot(cfg.spectral_width(), cfg.spectral_width(), rng);
    m.fc = FcHeadParams::init(cfg.spectral_width(), cfg.feature_dim, cfg.dropout, rng);
    m.fc.slope = cfg.slope;
    m.text = EmbeddingTable::init(cfg.vocab_size, cfg.embed_dim, cfg.fields, cfg.feature_dim, rng);
    m.label_proj = LabelProjection::init(cfg.feature_dim, cfg.labels, cfg.label_dim, rng);
    m.gat = GatParams::init(cfg.labels, cfg.label_dim, cfg.gat_heads, rng);
    m.gat.slope = cfg.slope;
    m.label_graph = threshold_correlation(CoOccurrence{cfg.labels, std::vector<std::int64_t>(cfg.labels * cfg.labels, 0),
                                                       std::vector<std::int64_t>(cfg.labels, 0)},
                                          0.4);
    return m;
  }

  /// Every trainable tensor keyed by module path. The Chebyshev cell is
  /// listed only when it sits on the forward path.
  ParamList parameters() const {
    ParamList out;
    gru.collect("latent.gru.", out);
    latent.collect("latent.attn.", out);
    spectral.collect("spectral.", out);
    if (config.use_cheb_gcn) cheb.collect("cheb.", out);
    fc.collect("fc.", out);
    text.collect("text.", out);
    label_proj.collect("label_proj.", out);
    gat.collect("gat.", out);
    return out;
  }

  /// fixed_basis replaces the per-sample graph Fourier bases (used to hold
  /// the spectrum constant under finite differences).
  ForwardResult forward(const Batch& b, bool training, Rng* rng = nullptr, const Tensor* fixed_basis = nullptr) const {
    const std::size_t bs = b.size, n = config.sensors, t = config.steps;
    if (b.series.shape() != Shape{bs, n, t}) {
      throw ShapeError("forward: series " + shape_str(b.series.shape()) + " vs model [" + std::to_string(bs) + "x" +
                       std::to_string(n) + "x" + std::to_string(t) + "]");
    }
    ForwardResult r;
    const Tensor h = gru_encode(reshape(b.series, {bs * n, t}), gru);
    r.adjacency = latent_adjacency(reshape(h, {bs, n, config.hidden_dim}), latent).weights;
    r.basis = fixed_basis ? *fixed_basis : batch_graph_basis(r.adjacency);
    Tensor spec = spectral_conv(b.series, r.basis, spectral);
    if (config.use_cheb_gcn) spec = cheb_gcn_cell(spec, SensorAdjacency{r.adjacency}, cheb);
    r.sensor_tokens = fc_head(spec, fc, training, rng);
    const Tensor z_embd = embed_text_batch(b.tokens, bs, text);
    const FusedFeature fused = attention_fuse(z_embd, r.sensor_tokens);
    r.attention = fused.weights;
    const Tensor nodes = label_node_features(fused.z_att, label_proj);
    r.logits = gat_forward(nodes, label_graph, gat);
    r.probs = sigmoid(r.logits);
    return r;
  }
};

inline ModelConfig model_config_for(const DatasetSchema& schema) {
  ModelConfig c;
  c.sensors = schema.sensors();
  c.steps = schema.max_steps;
  c.labels = schema.labels();
  c.fields = schema.fields();
  c.vocab_size = schema.vocab_size();
  return c;
}

}  // namespace grassnet
