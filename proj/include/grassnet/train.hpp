// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "grassnet/checkpoint.hpp"
#include "grassnet/losses.hpp"
#include "grassnet/metrics.hpp"
#include "grassnet/model.hpp"
#include "grassnet/optim.hpp"

namespace grassnet {

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  double rho = 0.9;
  double eps = 1e-8;
  std::size_t batch_size = 256;
  std::size_t patience = 25;
  std::size_t max_epochs = 200;
  std::uint64_t seed = 0;
  std::size_t max_steps = 2;

  std::size_t embed_dim = 16;
  std::size_t feature_dim = 64;
  std::size_t hidden_dim = 64;
  std::size_t key_dim = 64;
  std::size_t label_dim = 16;
  std::size_t gat_heads = 2;
  std::size_t spectral_channels = 4;
  std::size_t kernel_width = 3;
  ChannelCombine channel_combine = ChannelCombine::sum;
  bool use_cheb_gcn = false;
  double dropout = 0.2;
  double slope = 0.2;

  double tau = 0.4;
  LossConfig loss;
  bool use_unlabeled_loss = true;
  // Also record train-set O-AUC after every epoch.
  bool track_train_auc = false;

  RmsPropConfig optimizer() const { return {learning_rate, weight_decay, rho, eps}; }

  void validate() const {
    if (!(learning_rate > 0) || weight_decay < 0 || !(rho > 0 && rho < 1) || !(eps > 0)) {
      throw ContractError("train config: rates must be positive and rho in (0,1)");
    }
    if (patience < 1) throw ContractError("train config: patience must be >= 1");
    if (batch_size < 1) throw ContractError("train config: batch_size must be >= 1");
    if (!(tau >= 0 && tau <= 1)) throw ContractError("train config: tau must lie in [0,1]");
    loss.validate();
  }

  ModelConfig model_config(const DatasetSchema& schema) const {
    ModelConfig c = model_config_for(schema);
    c.hidden_dim = hidden_dim;
    c.key_dim = key_dim;
    c.spectral_channels = spectral_channels;
    c.kernel_width = kernel_width;
    c.combine = channel_combine;
    c.use_cheb_gcn = use_cheb_gcn;
    c.feature_dim = feature_dim;
    c.embed_dim = embed_dim;
    c.label_dim = label_dim;
    c.gat_heads = gat_heads;
    c.dropout = dropout;
    c.slope = slope;
    return c;
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"weight_decay", c.weight_decay}, {"rho", c.rho}, {"eps", c.eps},
          {"batch_size", c.batch_size}, {"patience", c.patience}, {"max_epochs", c.max_epochs}, {"seed", c.seed},
          {"max_steps", c.max_steps}, {"embed_dim", c.embed_dim}, {"feature_dim", c.feature_dim},
          {"hidden_dim", c.hidden_dim}, {"key_dim", c.key_dim}, {"label_dim", c.label_dim}, {"gat_heads", c.gat_heads},
          {"spectral_channels", c.spectral_channels}, {"kernel_width", c.kernel_width},
          {"channel_combine", c.channel_combine == ChannelCombine::sum ? "sum" : "concat"},
          {"use_cheb_gcn", c.use_cheb_gcn}, {"dropout", c.dropout}, {"slope", c.slope}, {"tau", c.tau},
          {"mode", to_string(c.loss.mode)}, {"gamma_pos", c.loss.gamma_pos}, {"gamma_neg", c.loss.gamma_neg},
          {"margin", c.loss.margin}, {"pseudo_threshold", c.loss.pseudo_threshold},
          {"symmetric_pseudo", c.loss.symmetric_pseudo}, {"use_unlabeled_loss", c.use_unlabeled_loss},
          {"track_train_auc", c.track_train_auc}};
}

/// Reads a flat JSON object; absent keys keep their defaults and unknown
/// keys are rejected. Setting `mode` alone selects that mode's default
/// focusing parameters (focal 2/2, asymmetric 0/2 with margin 0.05).
inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ContractError("train config must be a JSON object");
  TrainConfig c;
  const auto defaults = to_json(c);
  for (const auto& [k, v] : j.items()) {
    if (!defaults.contains(k)) throw ContractError("train config: unknown key '" + k + "'");
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("learning_rate", c.learning_rate);
  get("weight_decay", c.weight_decay);
  get("rho", c.rho);
  get("eps", c.eps);
  get("batch_size", c.batch_size);
  get("patience", c.patience);
  get("max_epochs", c.max_epochs);
  get("seed", c.seed);
  get("max_steps", c.max_steps);
  get("embed_dim", c.embed_dim);
  get("feature_dim", c.feature_dim);
  get("hidden_dim", c.hidden_dim);
  get("key_dim", c.key_dim);
  get("label_dim", c.label_dim);
  get("gat_heads", c.gat_heads);
  get("spectral_channels", c.spectral_channels);
  get("kernel_width", c.kernel_width);
  if (j.contains("channel_combine")) c.channel_combine = channel_combine_from_string(j.at("channel_combine"));
  get("use_cheb_gcn", c.use_cheb_gcn);
  get("dropout", c.dropout);
  get("slope", c.slope);
  get("tau", c.tau);
  if (j.contains("mode")) {
    switch (loss_mode_from_string(j.at("mode"))) {
      case LossMode::bce: c.loss = LossConfig::bce(); break;
      case LossMode::focal: c.loss = LossConfig::focal(); break;
      case LossMode::asymmetric: c.loss = LossConfig::asymmetric(); break;
    }
  }
  get("gamma_pos", c.loss.gamma_pos);
  get("gamma_neg", c.loss.gamma_neg);
  get("margin", c.loss.margin);
  get("pseudo_threshold", c.loss.pseudo_threshold);
  get("symmetric_pseudo", c.loss.symmetric_pseudo);
  get("use_unlabeled_loss", c.use_unlabeled_loss);
  get("track_train_auc", c.track_train_auc);
  c.validate();
  return c;
}

/// Stops once `patience` consecutive updates fail to beat the best value.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Returns true when training should stop after this epoch.
  bool update(double metric, std::size_t epoch) {
    if (std::isnan(metric)) metric = -std::numeric_limits<double>::infinity();
    if (epoch_count_ == 0 || metric > best_) {
      best_ = metric;
      best_epoch_ = epoch;
      stale_ = 0;
    } else {
      ++stale_;
    }
    ++epoch_count_;
    return stale_ >= patience_;
  }

  bool improved_last() const { return stale_ == 0; }
  double best() const { return best_; }
  std::size_t best_epoch() const { return best_epoch_; }

 private:
  std::size_t patience_;
  std::size_t epoch_count_ = 0;
  std::size_t stale_ = 0;
  std::size_t best_epoch_ = 0;
  double best_ = -std::numeric_limits<double>::infinity();
};

inline constexpr std::size_t kEvalBatch = 256;

/// Eval-mode probabilities, row-major [samples x C], in fixed-size batches
/// so results do not depend on the caller.
inline std::vector<double> predict_scores(const GraSSNet& model, const Dataset& ds) {
  std::vector<double> out;
  out.reserve(ds.size() * model.config.labels);
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < ds.size(); start += kEvalBatch) {
    idx.resize(std::min(kEvalBatch, ds.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const auto r = model.forward(make_batch(ds, idx), false);
    out.insert(out.end(), r.probs.values().begin(), r.probs.values().end());
  }
  return out;
}

inline EvalReport evaluate_model(const GraSSNet& model, const Dataset& ds) {
  return evaluate(predict_scores(model, ds), ds.targets(), ds.schema.label_names);
}

/// Validation O-AUC, NaN when undefined.
inline double overall_auc_or_nan(const EvalReport& r) {
  return r.overall_auc ? *r.overall_auc : std::numeric_limits<double>::quiet_NaN();
}

/// Supervised plus (optionally) pseudo-label loss for one forward pass.
inline Tensor batch_loss(const ForwardResult& fwd, const LabeledBatchTargets& targets, const TrainConfig& cfg) {
  const Tensor sup = supervised_loss(fwd.probs, targets, cfg.loss);
  if (!cfg.use_unlabeled_loss) return sup;
  return total_loss(sup, unlabeled_loss(fwd.probs, targets, cfg.loss));
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double valid_auc = 0.0;
  std::optional<double> train_auc;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
};

inline nlohmann::json to_json(const std::vector<EpochRecord>& h) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : h) {
    out.push_back({{"epoch", r.epoch}, {"train_loss", r.train_loss},
                   {"valid_auc", std::isnan(r.valid_auc) ? nlohmann::json(nullptr) : nlohmann::json(r.valid_auc)},
                   {"train_auc", detail::opt_json(r.train_auc)}});
  }
  return out;
}

/// Per epoch: shuffled mini-batches, RMSProp updates, then validation
/// O-AUC drives early stopping. Returns the best-epoch checkpoint.
/// on_epoch may return false to stop after the current epoch.
inline TrainResult train(const Dataset& train_set, const Dataset& valid_set, const TrainConfig& cfg,
                         const std::function<bool(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  if (train_set.size() == 0) throw ContractError("train: empty training set");
  const auto& schema = train_set.schema;

  Rng init_rng(cfg.seed);
  Rng shuffle_rng(cfg.seed + 1);
  Rng dropout_rng(cfg.seed + 2);
  GraSSNet model = GraSSNet::init(cfg.model_config(schema), init_rng);
  model.label_graph = threshold_correlation(build_cooccurrence(train_set.targets()), cfg.tau);

  auto named = model.parameters();
  std::vector<Tensor> params;
  for (auto& [_, t] : named) params.push_back(t);
  RmsPropState opt;
  const auto opt_cfg = cfg.optimizer();

  TrainResult result;
  EarlyStopping stopper(cfg.patience);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      const Batch batch = make_batch(train_set, std::span<const std::size_t>(order).subspan(start, len));
      const auto fwd = model.forward(batch, true, &dropout_rng);
      const Tensor loss = batch_loss(fwd, batch.targets, cfg);
      if (!std::isfinite(loss.item())) {
        throw DivergenceError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batches + 1));
      }
      for (auto& p : params) p.zero_grad();
      loss.backward();
      rmsprop_step(params, opt, opt_cfg);
      loss_sum += loss.item();
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    rec.valid_auc = overall_auc_or_nan(evaluate_model(model, valid_set));
    if (cfg.track_train_auc) rec.train_auc = evaluate_model(model, train_set).overall_auc;
    result.history.push_back(rec);

    const bool stop = stopper.update(rec.valid_auc, epoch);
    if (stopper.improved_last()) {
      result.best = make_checkpoint(model, opt, schema, epoch, rec.valid_auc, to_json(cfg));
      result.best_epoch = epoch;
    }
    const bool keep_going = !on_epoch || on_epoch(rec);
    if (stop || !keep_going) break;
  }
  for (auto& p : params) p.zero_grad();
  return result;
}

/// Refuses data whose column layout differs from the checkpoint's.
inline void require_schema(const Checkpoint& ck, const std::vector<std::string>& header) {
  const auto got = DatasetSchema::layout_hash(header, ck.schema.max_steps);
  if (got != ck.schema_hash) {
    throw SchemaMismatch("dataset schema hash " + std::to_string(got) + " does not match checkpoint schema hash " +
                         std::to_string(ck.schema_hash));
  }
}

/// Loads a CSV against a checkpoint's schema after checking its header hash.
inline Dataset load_for_checkpoint(const Checkpoint& ck, const std::string& path, bool lenient) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  std::getline(in, line);
  require_schema(ck, detail::split_csv(line));
  in.clear();
  in.seekg(0);
  return parse_dataset(in, ck.schema, lenient, path);
}

}  // namespace grassnet
