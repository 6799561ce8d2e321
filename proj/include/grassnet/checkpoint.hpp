// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint layout (all integers little-endian):
//   "GSSN" | u32 version | u64 meta_len | meta JSON bytes
//   | u64 tensor_count | per tensor: u64 name_len, name, u64 rank,
//     u64 dims[rank], f64 values[prod(dims)]
// Tensors hold the model parameters, the optimizer's running averages
// (prefixed "opt/") and the label graph ("label_graph/p", "label_graph/a").
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "grassnet/data.hpp"
#include "grassnet/model.hpp"
#include "grassnet/optim.hpp"

namespace grassnet {

inline constexpr char kCheckpointMagic[4] = {'G', 'S', 'S', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> values;

  bool operator==(const NamedArray&) const = default;
};

struct Checkpoint {
  ModelConfig model;
  DatasetSchema schema;
  nlohmann::json train_config = nlohmann::json::object();
  double tau = 0.4;
  std::size_t epoch = 0;
  double best_metric = 0.0;
  std::uint64_t schema_hash = 0;
  std::vector<NamedArray> tensors;
};

inline Checkpoint make_checkpoint(const GraSSNet& model, const RmsPropState& opt, const DatasetSchema& schema,
                                  std::size_t epoch, double best_metric, nlohmann::json train_config = nlohmann::json::object()) {
  Checkpoint ck;
  ck.model = model.config;
  ck.schema = schema;
  ck.train_config = std::move(train_config);
  ck.tau = model.label_graph.tau;
  ck.epoch = epoch;
  ck.best_metric = best_metric;
  ck.schema_hash = schema.hash();
  const auto params = model.parameters();
  for (const auto& [name, t] : params) ck.tensors.push_back({name, t.shape(), {t.values().begin(), t.values().end()}});
  for (std::size_t i = 0; i < opt.square_avg.size() && i < params.size(); ++i) {
    if (opt.square_avg[i].empty()) continue;
    ck.tensors.push_back({"opt/" + params[i].first, params[i].second.shape(), opt.square_avg[i]});
  }
  const std::size_t c = model.label_graph.labels;
  ck.tensors.push_back({"label_graph/p", {c, c}, model.label_graph.p});
  ck.tensors.push_back({"label_graph/a", {c, c}, {model.label_graph.a_label.begin(), model.label_graph.a_label.end()}});
  return ck;
}

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw DataError("checkpoint: truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline std::string get_bytes(std::istream& is, std::uint64_t n) {
  if (n > (1ull << 32)) throw DataError("checkpoint: implausible length " + std::to_string(n));
  std::string s(n, '\0');
  if (n && !is.read(s.data(), static_cast<std::streamsize>(n))) throw DataError("checkpoint: truncated");
  return s;
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ck, std::ostream& os) {
  os.write(kCheckpointMagic, 4);
  const std::uint32_t ver = kCheckpointVersion;
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>((ver >> (8 * i)) & 0xff));
  const nlohmann::json meta = {{"model", to_json(ck.model)}, {"schema", to_json(ck.schema)},
                               {"train_config", ck.train_config}, {"tau", ck.tau}, {"epoch", ck.epoch},
                               {"best_metric", ck.best_metric}, {"schema_hash", ck.schema_hash}};
  const std::string m = meta.dump();
  detail::put_u64(os, m.size());
  os.write(m.data(), static_cast<std::streamsize>(m.size()));
  detail::put_u64(os, ck.tensors.size());
  for (const auto& t : ck.tensors) {
    detail::put_u64(os, t.name.size());
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    detail::put_u64(os, t.shape.size());
    for (auto d : t.shape) detail::put_u64(os, d);
    for (double v : t.values) detail::put_u64(os, std::bit_cast<std::uint64_t>(v));
  }
  if (!os) throw DataError("checkpoint: write failed");
}

inline Checkpoint read_checkpoint(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) throw DataError("checkpoint: bad magic bytes");
  unsigned char vb[4];
  if (!is.read(reinterpret_cast<char*>(vb), 4)) throw DataError("checkpoint: truncated");
  const std::uint32_t ver = vb[0] | (vb[1] << 8) | (vb[2] << 16) | (static_cast<std::uint32_t>(vb[3]) << 24);
  if (ver != kCheckpointVersion) throw DataError("checkpoint: unsupported format version " + std::to_string(ver));
  const auto meta = nlohmann::json::parse(detail::get_bytes(is, detail::get_u64(is)));
  Checkpoint ck;
  ck.model = model_config_from_json(meta.at("model"));
  ck.schema = schema_from_json(meta.at("schema"));
  ck.train_config = meta.at("train_config");
  ck.tau = meta.at("tau");
  ck.epoch = meta.at("epoch");
  ck.best_metric = meta.at("best_metric");
  ck.schema_hash = meta.at("schema_hash");
  const auto count = detail::get_u64(is);
  for (std::uint64_t k = 0; k < count; ++k) {
    NamedArray t;
    t.name = detail::get_bytes(is, detail::get_u64(is));
    const auto rank = detail::get_u64(is);
    if (rank > 8) throw DataError("checkpoint: tensor " + t.name + " has rank " + std::to_string(rank));
    for (std::uint64_t r = 0; r < rank; ++r) t.shape.push_back(detail::get_u64(is));
    const auto n = detail::numel(t.shape);
    t.values.resize(n);
    for (auto& v : t.values) v = std::bit_cast<double>(detail::get_u64(is));
    ck.tensors.push_back(std::move(t));
  }
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path);
  save_checkpoint(ck, os);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  return read_checkpoint(is);
}

/// Rebuilds the model (and optionally the optimizer state) from a checkpoint.
inline GraSSNet restore_model(const Checkpoint& ck, RmsPropState* opt = nullptr) {
  Rng rng(0);
  GraSSNet model = GraSSNet::init(ck.model, rng);
  std::unordered_map<std::string, const NamedArray*> by_name;
  for (const auto& t : ck.tensors) by_name[t.name] = &t;
  auto params = model.parameters();
  if (opt) opt->square_avg.assign(params.size(), {});
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& [name, tensor] = params[i];
    auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("checkpoint: missing tensor " + name);
    if (it->second->shape != tensor.shape()) {
      throw DataError("checkpoint: tensor " + name + " has shape " + shape_str(it->second->shape) + ", model expects " +
                      shape_str(tensor.shape()));
    }
    std::copy(it->second->values.begin(), it->second->values.end(), tensor.mutable_values().begin());
    if (opt) {
      auto o = by_name.find("opt/" + name);
      if (o != by_name.end()) opt->square_avg[i] = o->second->values;
    }
  }
  const std::size_t c = ck.model.labels;
  auto p = by_name.find("label_graph/p");
  auto a = by_name.find("label_graph/a");
  if (p == by_name.end() || a == by_name.end()) throw DataError("checkpoint: missing label graph");
  model.label_graph.labels = c;
  model.label_graph.tau = ck.tau;
  model.label_graph.p = p->second->values;
  model.label_graph.a_label.assign(c * c, 0);
  for (std::size_t i = 0; i < c * c; ++i) model.label_graph.a_label[i] = a->second->values.at(i) != 0.0 ? 1 : 0;
  return model;
}

}  // namespace grassnet
