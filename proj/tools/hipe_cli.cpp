// Command-line harness: run experiments, score a batch, list benchmarks.
#include "hipe/acquisition.hpp"
#include "hipe/benchmarks.hpp"
#include "hipe/config.hpp"
#include "hipe/experiment.hpp"
#include "hipe/results_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw hipe::ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw hipe::ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

hipe::Matrix matrix_from_json(const json& rows, const std::string& what) {
  if (!rows.is_array() || rows.empty() || !rows.front().is_array()) {
    throw hipe::ConfigError(what + " must be a non-empty array of rows");
  }
  const auto cols = static_cast<hipe::Index>(rows.front().size());
  hipe::Matrix m(static_cast<hipe::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].is_array() || static_cast<hipe::Index>(rows[i].size()) != cols) {
      throw hipe::ConfigError(what + ": ragged rows");
    }
    for (hipe::Index j = 0; j < cols; ++j) m(static_cast<hipe::Index>(i), j) = rows[i][static_cast<std::size_t>(j)].get<double>();
  }
  return m;
}

int run_command(const std::string& config_path, const std::optional<std::string>& algo,
                const std::optional<std::string>& benchmark, const std::optional<int>& q,
                const std::optional<int>& batches, const std::optional<std::string>& seeds,
                const std::optional<std::string>& out, const std::optional<std::string>& profile) {
  json doc = config_path.empty() ? json::object() : read_json_file(config_path);
  if (!doc.is_object()) throw hipe::ConfigError("config must be a JSON object");
  if (algo) doc["algo"] = *algo;
  if (benchmark) doc["benchmark"] = *benchmark;
  if (q) doc["q"] = *q;
  if (batches) doc["batches"] = *batches;
  if (seeds) doc["seeds"] = *seeds;
  if (out) doc["out_dir"] = *out;
  if (profile) doc["profile"] = *profile;
  const hipe::ExperimentConfig cfg = hipe::config_from_json(doc);

  const hipe::ExperimentOutcome outcome = hipe::run_experiment(cfg);
  for (const hipe::RunRecord& r : outcome.records) {
    if (r.failed) std::cerr << "seed " << r.seed << " failed at batch " << r.failed_batch << ": " << r.error << "\n";
  }
  std::cout << "wrote " << cfg.out_dir << "/runs.csv (" << outcome.records.size() << " seeds, "
            << outcome.failed_seeds << " failed)\n";
  return outcome.exit_code;
}

int eval_acq_command(const std::string& algo, const std::string& batch_file, const std::string& data_file,
                     const std::string& config_path, std::uint64_t seed) {
  json cfg_doc = config_path.empty() ? json::object() : read_json_file(config_path);
  const hipe::ExperimentConfig cfg = hipe::config_from_json(cfg_doc);
  hipe::AcqKind kind;
  try {
    kind = hipe::parse_acq_kind(algo);
  } catch (const std::invalid_argument& e) {
    throw hipe::ConfigError(e.what());
  }
  const json batch_doc = read_json_file(batch_file);
  const hipe::Matrix batch =
      matrix_from_json(batch_doc.is_object() ? batch_doc.value("batch", json()) : batch_doc, "batch");
  const json data_doc = read_json_file(data_file);
  hipe::Dataset data = hipe::Dataset::empty(batch.cols());
  if (data_doc.contains("points") && !data_doc.at("points").empty()) {
    data.points = matrix_from_json(data_doc.at("points"), "points");
    const auto y = data_doc.at("outcomes").get<std::vector<double>>();
    data.outcomes = Eigen::Map<const hipe::Vector>(y.data(), static_cast<hipe::Index>(y.size()));
  }
  if (data.dim() != batch.cols()) throw hipe::ConfigError("batch and data dimensions differ");
  try {
    data.validate();
  } catch (const std::invalid_argument& e) {
    throw hipe::ConfigError(e.what());
  }
  const double value = hipe::score_acquisition(cfg, kind, data, batch, seed);
  std::printf("%s\n", hipe::format_value(value).c_str());
  return hipe::kExitOk;
}

int bench_list_command() {
  std::printf("%-24s %5s %5s %8s %12s\n", "name", "d_eff", "D", "noise", "optimum");
  for (const hipe::Benchmark& b : hipe::registry()) {
    std::printf("%-24s %5d %5d %8.3g %12.6f\n", b.name.c_str(), b.effective_dim, b.total_dim, b.noise_sd,
                b.optimum_value);
  }
  return hipe::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Batch initialization acquisitions for Bayesian optimization"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run seeded experiments and write runs.csv plus per-seed JSON records");
  std::string config_path;
  std::optional<std::string> algo, benchmark, seeds, out, profile;
  std::optional<int> q, batches;
  run->add_option("--config", config_path, "JSON config file");
  run->add_option("--algo", algo, "sobol, random, lhs, lhs-beta, bald, epig, nipv or hipe");
  run->add_option("--benchmark", benchmark, "Benchmark name (see bench-list)");
  run->add_option("--q", q, "Batch size");
  run->add_option("--batches", batches, "Number of batches");
  run->add_option("--seeds", seeds, "Seed list: 3, 0..19 or 1,4,7");
  run->add_option("--out", out, "Output directory");
  run->add_option("--profile", profile, "paper or fast");

  auto* eval = app.add_subcommand("eval-acq", "Evaluate an acquisition at a batch given observed data");
  std::string eval_algo, batch_file, data_file, eval_config;
  std::uint64_t eval_seed = 0;
  eval->add_option("--algo", eval_algo, "bald, epig, nipv or hipe")->required();
  eval->add_option("--batch-file", batch_file, "JSON array of rows (or {\"batch\": rows})")->required();
  eval->add_option("--data-file", data_file, "JSON {\"points\": rows, \"outcomes\": values}")->required();
  eval->add_option("--config", eval_config, "JSON config file for sample sizes");
  eval->add_option("--seed", eval_seed, "Seed for the ensemble, test points and base draws");

  app.add_subcommand("bench-list", "List registered benchmarks");
  app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? hipe::kExitOk : hipe::kExitConfig;
  }

  try {
    if (run->parsed()) return run_command(config_path, algo, benchmark, q, batches, seeds, out, profile);
    if (eval->parsed()) return eval_acq_command(eval_algo, batch_file, data_file, eval_config, eval_seed);
    if (app.got_subcommand("bench-list")) return bench_list_command();
    if (app.got_subcommand("version")) {
      std::printf("hipe %s\n", kVersion);
      return hipe::kExitOk;
    }
  } catch (const hipe::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return hipe::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return hipe::kExitRuntime;
  }
  return hipe::kExitOk;
}
