// SPDX-License-Identifier: Apache-2.0
//
// grassnet: train, evaluate and run the model from the command line.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "grassnet/grassnet.hpp"

namespace fs = std::filesystem;
using namespace grassnet;

namespace {

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

int run_train(const std::string& config_path, const std::string& train_path, const std::string& valid_path,
              const std::string& out_dir, bool quiet) {
  const TrainConfig cfg = config_path.empty() ? TrainConfig{} : train_config_from_json(read_json(config_path));
  const auto schema = infer_schema(train_path, cfg.max_steps);
  const auto train_set = load_dataset(train_path, schema, false);
  const auto valid_set = load_dataset(valid_path, schema, true);

  const auto result = train(train_set, valid_set, cfg, [&](const EpochRecord& r) {
    if (!quiet) std::fprintf(stderr, "epoch %3zu  loss %.6f  valid O-AUC %.4f\n", r.epoch, r.train_loss, r.valid_auc);
    return true;
  });

  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  save_checkpoint(result.best, (out / "checkpoint.gssn").string());
  write_json(to_json(result.history), out / "history.json");
  const auto model = restore_model(result.best);
  write_json(label_graph_to_json(model.label_graph), out / "label_graph.json");
  std::cout << "best epoch " << result.best_epoch << "\n" << render_table(evaluate_model(model, valid_set));
  return 0;
}

int run_eval(const std::string& ck_path, const std::string& data_path, bool json, bool strict) {
  const auto ck = load_checkpoint(ck_path);
  const auto model = restore_model(ck);
  const auto report = evaluate_model(model, load_for_checkpoint(ck, data_path, !strict));
  if (json) std::cout << to_json(report).dump(2) << '\n';
  else std::cout << render_table(report);
  return 0;
}

int run_predict(const std::string& ck_path, const std::string& data_path, const std::string& out_path) {
  const auto ck = load_checkpoint(ck_path);
  const auto model = restore_model(ck);
  const auto ds = load_for_checkpoint(ck, data_path, true);
  const auto scores = predict_scores(model, ds);
  const std::size_t c = ds.schema.labels();
  std::ofstream out(out_path);
  if (!out) throw DataError("cannot write " + out_path);
  out << "sample_id";
  for (const auto& name : ds.schema.label_names) out << ',' << name;
  out << '\n';
  char buf[32];
  for (std::size_t r = 0; r < ds.size(); ++r) {
    out << detail::csv_field(ds.samples[r].id);
    for (std::size_t l = 0; l < c; ++l) {
      std::snprintf(buf, sizeof buf, "%.17g", scores[r * c + l]);
      out << ',' << buf;
    }
    out << '\n';
  }
  return 0;
}

int run_export_label_graph(const std::string& ck_path, const std::string& out_path) {
  const auto model = restore_model(load_checkpoint(ck_path));
  write_json(label_graph_to_json(model.label_graph), out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GraSSNet multi-label failure prediction"};
  app.require_subcommand(1);

  std::string config, train_path, valid_path, out, checkpoint, data, spec;
  bool json = false, strict = false, quiet = false;

  auto* tr = app.add_subcommand("train", "train a model and write checkpoint.gssn, history.json, label_graph.json");
  tr->add_option("--config", config, "training config JSON");
  tr->add_option("--train", train_path, "training CSV")->required()->check(CLI::ExistingFile);
  tr->add_option("--valid", valid_path, "validation CSV")->required()->check(CLI::ExistingFile);
  tr->add_option("--out", out, "output directory")->required();
  tr->add_flag("--quiet", quiet, "no per-epoch progress");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a CSV");
  ev->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  ev->add_option("--data", data)->required()->check(CLI::ExistingFile);
  ev->add_flag("--json", json, "print the report as JSON");
  ev->add_flag("--strict", strict, "reject categorical values missing from the vocabulary");

  auto* pr = app.add_subcommand("predict", "write per-label probabilities");
  pr->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  pr->add_option("--data", data)->required()->check(CLI::ExistingFile);
  pr->add_option("--out", out, "output CSV")->required();

  auto* gs = app.add_subcommand("gen-synthetic", "write a synthetic train.csv and valid.csv");
  gs->add_option("--spec", spec, "generator spec JSON");
  gs->add_option("--out", out, "output directory")->required();

  auto* lg = app.add_subcommand("export-label-graph", "dump the label adjacency of a checkpoint");
  lg->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  lg->add_option("--out", out, "output JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (tr->parsed()) return run_train(config, train_path, valid_path, out, quiet);
    if (ev->parsed()) return run_eval(checkpoint, data, json, strict);
    if (pr->parsed()) return run_predict(checkpoint, data, out);
    if (gs->parsed()) {
      gen_synthetic(spec.empty() ? SyntheticSpec{} : synthetic_spec_from_json(read_json(spec)), out);
      return 0;
    }
    if (lg->parsed()) return run_export_label_graph(checkpoint, out);
  } catch (const SchemaMismatch& e) {
    std::cerr << "schema mismatch: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
