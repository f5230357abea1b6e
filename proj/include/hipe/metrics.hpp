// Model-quality metrics, out-of-sample inference and cross-algorithm ranks.
#pragma once

#include "hipe/batch_optimizer.hpp"
#include "hipe/gp_core.hpp"
#include "hipe/hyper_inference.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace hipe {

struct ModelMetrics {
  double rmse = 0.0;
  double nll = 0.0;
  /// Test points whose predictive variance was raised to the floor.
  int clamped_variances = 0;
};

/// Predictive variance floor in original outcome units.
inline constexpr double kMetricVarianceFloor = 1e-12;

/// The ensemble is fitted on standardized outcomes; the standardizer maps its
/// predictions back to the original units of test_values. NLL uses the latent
/// predictive unless noisy_nll is set.
ModelMetrics evaluate_model(const HyperEnsemble& ensemble, const Dataset& standardized_data,
                            const Standardizer& standardizer, const Matrix& test_points, const Vector& test_values,
                            bool noisy_nll = false);

/// Ensemble-averaged posterior mean (standardized units) and its gradient.
double ensemble_mean(const HyperEnsemble& ensemble, const Dataset& data, const Matrix& point, Matrix* grad = nullptr);

/// Maximizer of the ensemble-averaged posterior mean over the unit cube. The
/// center is returned when there is no data (constant mean).
Vector inferred_maximizer(const HyperEnsemble& ensemble, const Dataset& data, const OptimizerConfig& cfg);

/// One long-format result row.
struct MetricRow {
  std::uint64_t seed = 0;
  std::string algo;
  std::string benchmark;
  int batch_index = 0;
  std::string metric;
  double value = 0.0;
};

bool metric_higher_is_better(const std::string& metric);

/// Fractional ranks (1 = best, ties share the mean rank) within each
/// (benchmark, seed, batch) cell for one metric.
std::vector<double> fractional_ranks(const std::vector<double>& values, bool higher_is_better);

struct Rankings {
  /// batch_index -> algo -> mean rank over complete cells.
  std::map<int, std::map<std::string, double>> mean_rank;
  std::vector<std::string> warnings;
};

/// Cells missing any algorithm that appears for the same benchmark are
/// skipped with a warning.
Rankings compute_rankings(const std::vector<MetricRow>& rows, const std::string& metric);

}  // namespace hipe
