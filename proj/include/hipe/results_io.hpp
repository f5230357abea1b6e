// runs.csv and run_<seed>.json persistence.
#pragma once

#include "hipe/experiment.hpp"
#include "hipe/metrics.hpp"

#include <json.hpp>

#include <functional>
#include <string>
#include <vector>

namespace hipe {

inline constexpr const char* kCsvHeader = "seed,algo,benchmark,batch_index,metric,value";

/// Shortest round-trip decimal form ("%.17g"); "nan", "inf", "-inf" otherwise.
std::string format_value(double v);

std::string to_csv(const std::vector<MetricRow>& rows);
void write_runs_csv(const std::string& path, const std::vector<MetricRow>& rows);
/// Throws std::runtime_error naming the offending column or line.
std::vector<MetricRow> read_runs_csv(const std::string& path);
std::vector<MetricRow> parse_runs_csv(const std::string& text);

nlohmann::json to_json(const RunRecord& record);
void write_run_json(const std::string& dir, const RunRecord& record);

/// Process exit codes of the run command.
enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitRuntime = 2, kExitPartial = 3 };

struct ExperimentOutcome {
  std::vector<RunRecord> records;
  int failed_seeds = 0;
  int exit_code = kExitOk;
};

using SeedRunner = std::function<RunRecord(const ExperimentConfig&, std::uint64_t)>;

/// Runs every seed in order, writes out_dir/runs.csv and one JSON record per
/// seed. Exit code 2 when all seeds fail, 3 when some do. A runner that
/// throws anything but ConfigError fails only its own seed.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const SeedRunner& runner = run_seed);

}  // namespace hipe
