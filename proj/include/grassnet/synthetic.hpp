// SPDX-License-Identifier: Apache-2.0
//
// Planted-signal generator. Sensor readings are iid N(0,1); each label is a
// threshold on one of four sensor-order-invariant statistics that are
// mutually independent under that distribution:
//   0: mean over sensors of (first + last)
//   1: mean over sensors of (last - first)
//   2: spread over sensors of (first + last)
//   3: spread over sensors of (last - first)
// Labels beyond four reuse the statistics with a flipped sign. Thresholds
// sit at the (1 - positive_rate) quantile so every label has the requested
// positive rate before co-occurrence is injected.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "grassnet/data.hpp"

namespace grassnet {

struct SyntheticSpec {
  std::size_t sensors = 8;
  std::size_t steps = 2;
  std::size_t labels = 4;
  std::size_t samples = 256;
  std::size_t valid_samples = 64;
  double positive_rate = 0.2;
  double unlabeled_fraction = 0.0;
  // When cooccur_prob > 0, a positive cooccur_from label forces
  // cooccur_to positive with this probability.
  double cooccur_prob = 0.9;
  std::size_t cooccur_from = 1;
  std::size_t cooccur_to = 2;
  std::size_t categorical_fields = 2;
  std::size_t vocab_per_field = 4;
  std::uint64_t seed = 7;
};

inline SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  s.sensors = j.value("sensors", s.sensors);
  s.steps = j.value("steps", s.steps);
  s.labels = j.value("labels", s.labels);
  s.samples = j.value("samples", s.samples);
  s.valid_samples = j.value("valid_samples", s.valid_samples);
  s.positive_rate = j.value("positive_rate", s.positive_rate);
  s.unlabeled_fraction = j.value("unlabeled_fraction", s.unlabeled_fraction);
  s.cooccur_prob = j.value("cooccur_prob", s.cooccur_prob);
  s.cooccur_from = j.value("cooccur_from", s.cooccur_from);
  s.cooccur_to = j.value("cooccur_to", s.cooccur_to);
  s.categorical_fields = j.value("categorical_fields", s.categorical_fields);
  s.vocab_per_field = j.value("vocab_per_field", s.vocab_per_field);
  s.seed = j.value("seed", s.seed);
  return s;
}

struct SyntheticData {
  Dataset train;
  Dataset valid;
};

namespace detail {

inline double planted_statistic(const std::vector<double>& series, std::size_t sensors, std::size_t steps,
                                std::size_t label) {
  std::vector<double> v(sensors);
  const bool diff = (label % 4) % 2 == 1;
  for (std::size_t s = 0; s < sensors; ++s) {
    const double first = series[s * steps], last = series[s * steps + steps - 1];
    v[s] = diff ? last - first : first + last;
  }
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(sensors);
  double stat = mean;
  if ((label % 4) >= 2) {
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    stat = std::sqrt(var / static_cast<double>(sensors));
  }
  return (label / 4) % 2 == 1 ? -stat : stat;
}

}  // namespace detail

inline SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.sensors == 0 || spec.steps == 0 || spec.labels == 0) throw ContractError("gen_synthetic: sizes must be positive");
  if (spec.cooccur_prob > 0 && (spec.cooccur_from >= spec.labels || spec.cooccur_to >= spec.labels)) {
    throw ContractError("gen_synthetic: co-occurrence labels out of range");
  }
  Rng rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  DatasetSchema schema;
  schema.max_steps = spec.steps;
  for (std::size_t s = 0; s < spec.sensors; ++s) schema.sensor_names.push_back("sensor_" + std::to_string(s));
  for (std::size_t f = 0; f < spec.categorical_fields; ++f) {
    CategoricalField field{"cat_stage" + std::to_string(f), {kUnkToken}};
    for (std::size_t v = 0; v < spec.vocab_per_field; ++v) field.vocab.push_back("s" + std::to_string(f) + "v" + std::to_string(v));
    schema.categorical.push_back(std::move(field));
  }
  for (std::size_t l = 0; l < spec.labels; ++l) schema.label_names.push_back("label_kqi" + std::to_string(l + 1));

  const std::size_t total = spec.samples + spec.valid_samples;
  std::vector<Sample> samples(total);
  std::vector<std::vector<double>> stats(spec.labels, std::vector<double>(total));
  for (std::size_t i = 0; i < total; ++i) {
    auto& s = samples[i];
    s.id = (i < spec.samples ? "tr" : "va") + std::to_string(i);
    s.raw_steps = spec.steps;
    s.series.resize(spec.sensors * spec.steps);
    for (auto& x : s.series) x = normal(rng);
    for (std::size_t f = 0; f < spec.categorical_fields; ++f) {
      const auto pick = static_cast<std::size_t>(unit(rng) * static_cast<double>(spec.vocab_per_field));
      s.tokens.push_back(schema.token_offset(f) + 1 + std::min(pick, spec.vocab_per_field - 1));
    }
    for (std::size_t l = 0; l < spec.labels; ++l) stats[l][i] = detail::planted_statistic(s.series, spec.sensors, spec.steps, l);
  }
  for (std::size_t l = 0; l < spec.labels; ++l) {
    std::vector<double> sorted = stats[l];
    std::sort(sorted.begin(), sorted.end());
    const auto cut = static_cast<std::size_t>(std::floor((1.0 - spec.positive_rate) * static_cast<double>(total)));
    const double threshold = cut < total ? sorted[cut] : std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < total; ++i) {
      samples[i].y.push_back(stats[l][i] >= threshold ? 1.0 : 0.0);
    }
  }
  for (auto& s : samples) {
    const double draw = unit(rng);
    if (spec.cooccur_prob > 0 && s.y[spec.cooccur_from] != 0.0 && draw < spec.cooccur_prob) s.y[spec.cooccur_to] = 1.0;
    s.mask.assign(spec.labels, 1.0);
    for (auto& m : s.mask) m = unit(rng) < spec.unlabeled_fraction ? 0.0 : 1.0;
    for (std::size_t l = 0; l < spec.labels; ++l)
      if (s.mask[l] == 0.0) s.y[l] = 0.0;
  }
  SyntheticData out{{schema, {}}, {schema, {}}};
  out.train.samples.assign(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(spec.samples));
  out.valid.samples.assign(samples.begin() + static_cast<std::ptrdiff_t>(spec.samples), samples.end());
  return out;
}

/// Writes train.csv and valid.csv into dir.
inline void gen_synthetic(const SyntheticSpec& spec, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const auto data = generate_synthetic(spec);
  write_dataset_csv(data.train, (std::filesystem::path(dir) / "train.csv").string());
  write_dataset_csv(data.valid, (std::filesystem::path(dir) / "valid.csv").string());
}

}  // namespace grassnet
