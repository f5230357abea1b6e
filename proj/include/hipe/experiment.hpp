// Seeded active-learning and two-shot BO runs.
#pragma once

#include "hipe/acquisition.hpp"
#include "hipe/benchmarks.hpp"
#include "hipe/config.hpp"
#include "hipe/metrics.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace hipe {

/// Independent random streams of one seed. Per-batch streams are offset by
/// the batch index.
enum class Stream : std::uint64_t {
  kNoise = 1,
  kTestSet = 2,
  kFit = 100,
  kAcquisition = 200,
  kOptimizer = 300,
  kDesign = 400,
  kNei = 500,
  kPerturb = 600,
  kInference = 700,
};

std::uint64_t stream_seed(std::uint64_t seed, Stream stream, int batch = 0);

/// Wall-clock seconds per phase. All four selection phases are always
/// present; a phase that did not run stays at zero.
struct PhaseTimings {
  double model_fit_initial = 0.0;
  double acquisition_optimization = 0.0;
  double bo_model_fit = 0.0;
  double bo_utility_optimization = 0.0;
  /// Fit after the last batch, used only for metrics.
  double metrics_model_fit = 0.0;
};

/// 5%, 50% and 95% quantiles of each hyperparameter over the ensemble.
struct EnsembleSummary {
  std::vector<std::array<double, 3>> lengthscales;
  std::array<double, 3> noise_var{};
  std::array<double, 3> mean_const{};
  std::string source;
};

EnsembleSummary summarize(const HyperEnsemble& ensemble);

struct BatchRecord {
  int batch_index = 0;
  /// Design name, acquisition name, or "nei" for the BO-stage utility.
  std::string selector;
  Matrix design;
  Vector outcomes;
  /// Value of the maximized acquisition or utility (NaN for designs).
  double selection_value = 0.0;
  double beta = 0.0;
  EnsembleSummary ensemble;
  std::map<std::string, double> metrics;
  PhaseTimings timings;
};

inline constexpr int kSchemaVersion = 1;

struct RunRecord {
  int schema_version = kSchemaVersion;
  ExperimentConfig config;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  int failed_batch = -1;
  std::vector<BatchRecord> batches;
};

/// Uniform test inputs on the cube, seeded by (benchmark, seed).
Matrix evaluation_points(const std::string& benchmark, std::uint64_t seed, int count, Index dim);

RunRecord run_active_learning(const ExperimentConfig& cfg, std::uint64_t seed);
RunRecord run_two_shot(const ExperimentConfig& cfg, std::uint64_t seed);
/// Dispatches on cfg.mode and turns any error into a failed record.
RunRecord run_seed(const ExperimentConfig& cfg, std::uint64_t seed);

/// Long-format metric rows of one record; a failed record contributes one
/// "failed" row at the failing batch.
std::vector<MetricRow> metric_rows(const RunRecord& record);

/// Fits the ensemble to data (prior samples when empty) and evaluates one
/// acquisition at batch. Data outcomes are in original units.
double score_acquisition(const ExperimentConfig& cfg, AcqKind kind, const Dataset& data, const Matrix& batch,
                         std::uint64_t seed);

/// Ensemble for standardized data: prior draws when empty, MCMC otherwise.
HyperEnsemble fit_ensemble(const ExperimentConfig& cfg, const Dataset& standardized, std::uint64_t seed);

}  // namespace hipe
