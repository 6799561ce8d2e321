// SPDX-License-Identifier: Apache-2.0
//
// CSV datasets: one row per (sample, timestep). Header layout is
//   sample_id,timestep,<sensor columns...>,cat_<field>...,label_<name>...
// Columns prefixed `cat_` are categorical, `label_` are targets holding 0, 1
// or the missing sentinel NA; every other column is a numeric sensor.
#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "grassnet/targets.hpp"
#include "grassnet/tensor.hpp"

namespace grassnet {

inline constexpr const char* kUnkToken = "<unk>";

struct CategoricalField {
  std::string name;                // column name, including the cat_ prefix
  std::vector<std::string> vocab;  // vocab[0] is the UNK token
};

struct DatasetSchema {
  std::vector<std::string> sensor_names;
  std::vector<CategoricalField> categorical;
  std::vector<std::string> label_names;
  std::size_t max_steps = 2;
  std::string missing = "NA";

  std::size_t sensors() const { return sensor_names.size(); }
  std::size_t labels() const { return label_names.size(); }
  std::size_t fields() const { return categorical.size(); }

  std::size_t token_offset(std::size_t field) const {
    std::size_t off = 0;
    for (std::size_t f = 0; f < field; ++f) off += categorical[f].vocab.size();
    return off;
  }
  std::size_t vocab_size() const { return token_offset(categorical.size()); }

  std::vector<std::string> header() const {
    std::vector<std::string> h{"sample_id", "timestep"};
    h.insert(h.end(), sensor_names.begin(), sensor_names.end());
    for (const auto& c : categorical) h.push_back(c.name);
    h.insert(h.end(), label_names.begin(), label_names.end());
    return h;
  }

  /// FNV-1a over the column layout and step count (not the vocabularies).
  std::uint64_t hash() const { return layout_hash(header(), max_steps); }

  static std::uint64_t layout_hash(const std::vector<std::string>& header, std::size_t max_steps) {
    std::uint64_t h = 1469598103934665603ull;
    auto feed = [&h](const std::string& s) {
      for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
      }
      h ^= 0xff;
      h *= 1099511628211ull;
    };
    for (const auto& c : header) feed(c);
    feed(std::to_string(max_steps));
    return h;
  }
};

inline nlohmann::json to_json(const DatasetSchema& s) {
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& c : s.categorical) cats.push_back({{"name", c.name}, {"vocab", c.vocab}});
  return {{"sensor_names", s.sensor_names}, {"categorical", cats}, {"label_names", s.label_names},
          {"max_steps", s.max_steps}, {"missing", s.missing}};
}

inline DatasetSchema schema_from_json(const nlohmann::json& j) {
  DatasetSchema s;
  s.sensor_names = j.at("sensor_names").get<std::vector<std::string>>();
  for (const auto& c : j.at("categorical")) {
    s.categorical.push_back({c.at("name").get<std::string>(), c.at("vocab").get<std::vector<std::string>>()});
  }
  s.label_names = j.at("label_names").get<std::vector<std::string>>();
  s.max_steps = j.at("max_steps").get<std::size_t>();
  s.missing = j.value("missing", std::string("NA"));
  return s;
}

struct Sample {
  std::string id;
  std::vector<double> series;  // [N x max_steps], front zero-padded
  std::size_t raw_steps = 0;
  std::vector<std::size_t> tokens;  // global ids, one per field
  std::vector<double> y;            // [C]
  std::vector<double> mask;         // [C], 1 = observed

  bool fully_unlabeled() const {
    return std::all_of(mask.begin(), mask.end(), [](double m) { return m == 0.0; });
  }
};

struct Dataset {
  DatasetSchema schema;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }

  LabeledBatchTargets targets() const {
    const std::size_t c = schema.labels();
    std::vector<double> y, m;
    y.reserve(samples.size() * c);
    m.reserve(samples.size() * c);
    for (const auto& s : samples) {
      y.insert(y.end(), s.y.begin(), s.y.end());
      m.insert(m.end(), s.mask.begin(), s.mask.end());
    }
    return {samples.size(), c, std::move(y), std::move(m)};
  }
};

/// Pads a [steps][N] series to N x t_max: shorter series gain leading zero
/// steps, longer ones keep the most recent t_max steps.
inline Tensor zero_pad(const std::vector<std::vector<double>>& steps, std::size_t t_max) {
  if (steps.empty()) throw ShapeError("zero_pad: empty series");
  if (t_max == 0) throw ShapeError("zero_pad: t_max must be >= 1");
  const std::size_t n = steps[0].size();
  std::vector<double> out(n * t_max, 0.0);
  const std::size_t keep = std::min(steps.size(), t_max);
  const std::size_t first = steps.size() - keep;
  for (std::size_t k = 0; k < keep; ++k) {
    const auto& row = steps[first + k];
    if (row.size() != n) throw ShapeError("zero_pad: ragged sensor count");
    const std::size_t col = t_max - keep + k;
    for (std::size_t s = 0; s < n; ++s) out[s * t_max + col] = row[s];
  }
  return Tensor::from({n, t_max}, std::move(out));
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end;
}

inline bool parse_long(const std::string& s, long long& out) {
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end;
}

inline bool starts_with(const std::string& s, const char* prefix) { return s.rfind(prefix, 0) == 0; }

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += (c == '"') ? std::string("\"\"") : std::string(1, c);
  return q + '"';
}

}  // namespace detail

/// Reads only the header and categorical columns to lay out a schema whose
/// vocabularies are the sorted distinct values seen (after the UNK entry).
inline DatasetSchema infer_schema(std::istream& in, std::size_t max_steps = 2, const std::string& source = "<stream>") {
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": missing header");
  const auto header = detail::split_csv(line);
  if (header.size() < 2 || header[0] != "sample_id" || header[1] != "timestep") {
    throw DataError(source + ": line 1: header must start with sample_id,timestep");
  }
  DatasetSchema s;
  s.max_steps = max_steps;
  std::vector<std::size_t> cat_cols;
  for (std::size_t i = 2; i < header.size(); ++i) {
    if (detail::starts_with(header[i], "cat_")) {
      s.categorical.push_back({header[i], {}});
      cat_cols.push_back(i);
    } else if (detail::starts_with(header[i], "label_")) {
      s.label_names.push_back(header[i]);
    } else {
      if (!s.categorical.empty() || !s.label_names.empty()) {
        throw DataError(source + ": line 1: sensor column '" + header[i] + "' after categorical/label columns");
      }
      s.sensor_names.push_back(header[i]);
    }
  }
  std::vector<std::set<std::string>> seen(cat_cols.size());
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != header.size()) {
      throw DataError(source + ": line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                      " columns, got " + std::to_string(cells.size()));
    }
    for (std::size_t f = 0; f < cat_cols.size(); ++f) seen[f].insert(cells[cat_cols[f]]);
  }
  for (std::size_t f = 0; f < cat_cols.size(); ++f) {
    s.categorical[f].vocab.push_back(kUnkToken);
    for (const auto& v : seen[f])
      if (v != kUnkToken) s.categorical[f].vocab.push_back(v);
  }
  return s;
}

inline DatasetSchema infer_schema(const std::string& path, std::size_t max_steps = 2) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return infer_schema(in, max_steps, path);
}

/// Parses rows against an existing schema. Rows are grouped by sample_id
/// (first-appearance order) and sorted by timestep; categorical values and
/// labels come from each sample's last timestep. Unknown categories map to
/// UNK when lenient and raise otherwise.
inline Dataset parse_dataset(std::istream& in, const DatasetSchema& schema, bool lenient,
                             const std::string& source = "<stream>") {
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": missing header");
  const auto header = detail::split_csv(line);
  if (header != schema.header()) {
    throw SchemaMismatch(source + ": column layout hash " + std::to_string(DatasetSchema::layout_hash(header, schema.max_steps)) +
                         " does not match schema hash " + std::to_string(schema.hash()));
  }
  const std::size_t n = schema.sensors(), f = schema.fields(), c = schema.labels();
  std::vector<std::unordered_map<std::string, std::size_t>> lookup(f);
  for (std::size_t k = 0; k < f; ++k)
    for (std::size_t v = 0; v < schema.categorical[k].vocab.size(); ++v) lookup[k][schema.categorical[k].vocab[v]] = v;

  struct Row {
    long long step;
    std::vector<double> sensors;
    std::vector<std::size_t> tokens;
    std::vector<double> y, mask;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<Row>> groups;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv(line);
    const auto where = source + ": line " + std::to_string(lineno) + ": ";
    if (cells.size() != header.size()) {
      throw DataError(where + "expected " + std::to_string(header.size()) + " columns, got " + std::to_string(cells.size()));
    }
    Row row;
    if (!detail::parse_long(cells[1], row.step)) throw DataError(where + "timestep '" + cells[1] + "' is not an integer");
    row.sensors.resize(n);
    for (std::size_t s = 0; s < n; ++s) {
      if (!detail::parse_double(cells[2 + s], row.sensors[s])) {
        throw DataError(where + "sensor " + schema.sensor_names[s] + " value '" + cells[2 + s] + "' is not numeric");
      }
    }
    for (std::size_t k = 0; k < f; ++k) {
      const auto& cell = cells[2 + n + k];
      auto it = lookup[k].find(cell);
      if (it == lookup[k].end()) {
        if (!lenient) throw DataError(where + "unknown category '" + cell + "' in " + schema.categorical[k].name);
        row.tokens.push_back(schema.token_offset(k));
      } else {
        row.tokens.push_back(schema.token_offset(k) + it->second);
      }
    }
    for (std::size_t l = 0; l < c; ++l) {
      const auto& cell = cells[2 + n + f + l];
      if (cell == schema.missing) {
        row.y.push_back(0.0);
        row.mask.push_back(0.0);
      } else if (cell == "0" || cell == "1") {
        row.y.push_back(cell == "1" ? 1.0 : 0.0);
        row.mask.push_back(1.0);
      } else {
        throw DataError(where + "label " + schema.label_names[l] + " value '" + cell + "' is not 0, 1 or " + schema.missing);
      }
    }
    auto [it, fresh] = groups.try_emplace(cells[0]);
    if (fresh) order.push_back(cells[0]);
    it->second.push_back(std::move(row));
  }

  Dataset ds{schema, {}};
  ds.samples.reserve(order.size());
  for (const auto& id : order) {
    auto& rows = groups[id];
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.step < b.step; });
    std::vector<std::vector<double>> steps;
    for (const auto& r : rows) steps.push_back(r.sensors);
    Sample s;
    s.id = id;
    s.raw_steps = rows.size();
    const Tensor padded = zero_pad(steps, schema.max_steps);
    s.series.assign(padded.values().begin(), padded.values().end());
    s.tokens = rows.back().tokens;
    s.y = rows.back().y;
    s.mask = rows.back().mask;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

inline Dataset load_dataset(const std::string& path, const DatasetSchema& schema, bool lenient) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return parse_dataset(in, schema, lenient, path);
}

/// Writes the dataset back out; padded leading zero steps are not emitted.
inline void write_dataset_csv(const Dataset& ds, std::ostream& os) {
  const auto& sc = ds.schema;
  const auto header = sc.header();
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << detail::csv_field(header[i]);
  os << '\n';
  std::ostringstream num;
  num.precision(17);
  for (const auto& s : ds.samples) {
    const std::size_t steps = std::min(s.raw_steps, sc.max_steps);
    for (std::size_t t = sc.max_steps - steps; t < sc.max_steps; ++t) {
      os << detail::csv_field(s.id) << ',' << (t - (sc.max_steps - steps));
      for (std::size_t k = 0; k < sc.sensors(); ++k) {
        num.str("");
        num << s.series[k * sc.max_steps + t];
        os << ',' << num.str();
      }
      for (std::size_t k = 0; k < sc.fields(); ++k) {
        os << ',' << detail::csv_field(sc.categorical[k].vocab[s.tokens[k] - sc.token_offset(k)]);
      }
      for (std::size_t l = 0; l < sc.labels(); ++l) {
        os << ',' << (s.mask[l] == 0.0 ? sc.missing : (s.y[l] != 0.0 ? "1" : "0"));
      }
      os << '\n';
    }
  }
}

inline void write_dataset_csv(const Dataset& ds, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path);
  write_dataset_csv(ds, os);
}

}  // namespace grassnet
