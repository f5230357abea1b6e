#include "hipe/results_io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hipe {

namespace {

using nlohmann::json;

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json triple(const std::array<double, 3>& q) { return json{{"q05", q[0]}, {"q50", q[1]}, {"q95", q[2]}}; }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(item);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_value(const std::string& s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return HUGE_VAL;
  if (s == "-inf") return -HUGE_VAL;
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument(s);
  return v;
}

}  // namespace

std::string format_value(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string to_csv(const std::vector<MetricRow>& rows) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const MetricRow& r : rows) {
    out += std::to_string(r.seed) + "," + r.algo + "," + r.benchmark + "," + std::to_string(r.batch_index) + "," +
           r.metric + "," + format_value(r.value) + "\n";
  }
  return out;
}

void write_runs_csv(const std::string& path, const std::vector<MetricRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << to_csv(rows);
}

std::vector<MetricRow> parse_runs_csv(const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  if (!std::getline(ss, line)) throw std::runtime_error("runs.csv: missing header");
  const std::vector<std::string> expected = split_csv_line(kCsvHeader);
  const std::vector<std::string> header = split_csv_line(line);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (i >= header.size() || header[i] != expected[i]) {
      throw std::runtime_error("runs.csv: expected column '" + expected[i] + "' at position " + std::to_string(i));
    }
  }
  if (header.size() != expected.size()) throw std::runtime_error("runs.csv: unexpected column '" + header.back() + "'");

  std::vector<MetricRow> rows;
  for (int lineno = 2; std::getline(ss, line); ++lineno) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != expected.size()) throw std::runtime_error("runs.csv line " + std::to_string(lineno) + ": wrong field count");
    MetricRow r;
    try {
      r.seed = std::stoull(f[0]);
      r.algo = f[1];
      r.benchmark = f[2];
      r.batch_index = std::stoi(f[3]);
      r.metric = f[4];
      r.value = parse_value(f[5]);
    } catch (const std::exception&) {
      throw std::runtime_error("runs.csv line " + std::to_string(lineno) + ": malformed field");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<MetricRow> read_runs_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_runs_csv(ss.str());
}

json to_json(const RunRecord& record) {
  json doc;
  doc["schema_version"] = record.schema_version;
  doc["seed"] = record.seed;
  doc["config"] = to_json(record.config);
  doc["status"] = record.failed ? "failed" : "ok";
  if (record.failed) {
    doc["error"] = record.error;
    doc["failed_batch"] = record.failed_batch;
  }
  json batches = json::array();
  PhaseTimings total;
  for (const BatchRecord& br : record.batches) {
    json b;
    b["batch_index"] = br.batch_index;
    b["selector"] = br.selector;
    b["design"] = matrix_json(br.design);
    b["outcomes"] = std::vector<double>(br.outcomes.data(), br.outcomes.data() + br.outcomes.size());
    b["selection_value"] = number_or_null(br.selection_value);
    b["beta"] = number_or_null(br.beta);
    json ls = json::array();
    for (const auto& q : br.ensemble.lengthscales) ls.push_back(triple(q));
    b["ensemble"] = {{"source", br.ensemble.source},
                     {"lengthscales", ls},
                     {"noise_var", triple(br.ensemble.noise_var)},
                     {"mean_const", triple(br.ensemble.mean_const)}};
    json metrics = json::object();
    for (const auto& [k, v] : br.metrics) metrics[k] = number_or_null(v);
    b["metrics"] = metrics;
    b["timings"] = {{"model_fit_initial", br.timings.model_fit_initial},
                    {"acquisition_optimization", br.timings.acquisition_optimization},
                    {"bo_model_fit", br.timings.bo_model_fit},
                    {"bo_utility_optimization", br.timings.bo_utility_optimization},
                    {"metrics_model_fit", br.timings.metrics_model_fit}};
    total.model_fit_initial += br.timings.model_fit_initial;
    total.acquisition_optimization += br.timings.acquisition_optimization;
    total.bo_model_fit += br.timings.bo_model_fit;
    total.bo_utility_optimization += br.timings.bo_utility_optimization;
    batches.push_back(std::move(b));
  }
  doc["batches"] = batches;
  doc["timings_total"] = {{"model_fit_initial", total.model_fit_initial},
                          {"acquisition_optimization", total.acquisition_optimization},
                          {"bo_model_fit", total.bo_model_fit},
                          {"bo_utility_optimization", total.bo_utility_optimization}};
  return doc;
}

void write_run_json(const std::string& dir, const RunRecord& record) {
  const std::string path = (std::filesystem::path(dir) / ("run_" + std::to_string(record.seed) + ".json")).string();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << to_json(record).dump(2) << "\n";
}

ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const SeedRunner& runner) {
  cfg.validate();
  std::filesystem::create_directories(cfg.out_dir);
  ExperimentOutcome outcome;
  std::vector<MetricRow> rows;
  for (std::uint64_t seed : cfg.seeds) {
    RunRecord record;
    try {
      record = runner(cfg, seed);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      record = RunRecord{};
      record.config = cfg;
      record.seed = seed;
      record.failed = true;
      record.error = e.what();
      record.failed_batch = 0;
    }
    if (record.failed) ++outcome.failed_seeds;
    const std::vector<MetricRow> r = metric_rows(record);
    rows.insert(rows.end(), r.begin(), r.end());
    write_run_json(cfg.out_dir, record);
    outcome.records.push_back(std::move(record));
  }
  write_runs_csv((std::filesystem::path(cfg.out_dir) / "runs.csv").string(), rows);
  if (outcome.failed_seeds == static_cast<int>(cfg.seeds.size())) {
    outcome.exit_code = kExitRuntime;
  } else if (outcome.failed_seeds > 0) {
    outcome.exit_code = kExitPartial;
  }
  return outcome;
}

}  // namespace hipe
