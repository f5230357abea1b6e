#include "hipe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <stdexcept>
#include <tuple>

namespace hipe {

ModelMetrics evaluate_model(const HyperEnsemble& ensemble, const Dataset& standardized_data,
                            const Standardizer& standardizer, const Matrix& test_points, const Vector& test_values,
                            bool noisy_nll) {
  ensemble.validate();
  if (test_points.rows() == 0 || test_points.rows() != test_values.size()) {
    throw std::invalid_argument("evaluate_model: test set must be non-empty and consistent");
  }
  const Index t_count = test_points.rows();
  const Index m_count = ensemble.size();
  Matrix means(t_count, m_count);
  Matrix vars(t_count, m_count);
  ModelMetrics out;
  for (Index m = 0; m < m_count; ++m) {
    const ConditionedGp gp(standardized_data, ensemble.samples[static_cast<std::size_t>(m)], ensemble.kernel);
    const Vector mu = gp.mean(test_points);
    const Vector var = gp.variance(test_points, noisy_nll);
    for (Index t = 0; t < t_count; ++t) {
      means(t, m) = standardizer.restore_mean(mu(t));
      double v = standardizer.restore_variance(var(t));
      if (!(v >= kMetricVarianceFloor)) {
        v = kMetricVarianceFloor;
        ++out.clamped_variances;
      }
      vars(t, m) = v;
    }
  }
  const Vector avg = means.rowwise().mean();
  out.rmse = std::sqrt((avg - test_values).squaredNorm() / static_cast<double>(t_count));

  const double log_m = std::log(static_cast<double>(m_count));
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  double total = 0.0;
  Vector logs(m_count);
  for (Index t = 0; t < t_count; ++t) {
    for (Index m = 0; m < m_count; ++m) {
      const double r = test_values(t) - means(t, m);
      logs(m) = -0.5 * (log_2pi + std::log(vars(t, m)) + r * r / vars(t, m));
    }
    const double top = logs.maxCoeff();
    total += top + std::log((logs.array() - top).exp().sum()) - log_m;
  }
  out.nll = -total / static_cast<double>(t_count);
  return out;
}

double ensemble_mean(const HyperEnsemble& ensemble, const Dataset& data, const Matrix& point, Matrix* grad) {
  const double inv_m = 1.0 / static_cast<double>(ensemble.size());
  if (grad) grad->setZero(point.rows(), point.cols());
  double total = 0.0;
  for (const HyperSample& h : ensemble.samples) {
    const ConditionedGp gp(data, h, ensemble.kernel);
    const BatchPosterior post = gp.batch_posterior(point, false);
    total += post.mean.sum() * inv_m;
    if (grad) {
      const Matrix zero = Matrix::Zero(point.rows(), point.rows());
      gp.batch_posterior_backward(point, post, Vector::Constant(point.rows(), inv_m), zero, Matrix(), *grad);
    }
  }
  return total;
}

Vector inferred_maximizer(const HyperEnsemble& ensemble, const Dataset& data, const OptimizerConfig& cfg) {
  ensemble.validate();
  const Index dim = ensemble.dim();
  const Vector center = Vector::Constant(dim, 0.5);
  if (data.is_empty()) return center;

  // Conditioning is expensive; do it once per member.
  std::vector<ConditionedGp> models;
  for (const HyperSample& h : ensemble.samples) models.emplace_back(data, h, ensemble.kernel);
  const double inv_m = 1.0 / static_cast<double>(models.size());
  Objective objective = [&models, inv_m](const Matrix& x, Matrix* grad) {
    if (grad) grad->setZero(x.rows(), x.cols());
    double total = 0.0;
    for (const ConditionedGp& gp : models) {
      const BatchPosterior post = gp.batch_posterior(x, false);
      total += post.mean.sum() * inv_m;
      if (grad) {
        gp.batch_posterior_backward(x, post, Vector::Constant(x.rows(), inv_m), Matrix::Zero(x.rows(), x.rows()),
                                    Matrix(), *grad);
      }
    }
    return total;
  };

  std::vector<Matrix> warm = {center.transpose()};
  Vector mean_at_data = Vector::Zero(data.size());
  for (const ConditionedGp& gp : models) mean_at_data += gp.mean(data.points) * inv_m;
  Index best = 0;
  mean_at_data.maxCoeff(&best);
  warm.emplace_back(data.points.row(best));
  const OptimizationResult res = optimize_batch(objective, 1, static_cast<int>(dim), cfg, warm);
  return res.batch.row(0).transpose();
}

bool metric_higher_is_better(const std::string& metric) {
  if (metric == "rmse" || metric == "nll") return false;
  if (metric == "inferred_value" || metric == "in_sample_best") return true;
  throw std::invalid_argument("unknown metric '" + metric + "'");
}

std::vector<double> fractional_ranks(const std::vector<double>& values, bool higher_is_better) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return higher_is_better ? values[a] > values[b] : values[a] < values[b];
  });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mid;
    i = j + 1;
  }
  return ranks;
}

Rankings compute_rankings(const std::vector<MetricRow>& rows, const std::string& metric) {
  const bool higher = metric_higher_is_better(metric);
  using Cell = std::tuple<std::string, std::uint64_t, int>;
  std::map<std::string, std::set<std::string>> algos_per_bench;
  std::map<Cell, std::map<std::string, double>> cells;
  for (const MetricRow& r : rows) {
    if (r.metric != metric) continue;
    algos_per_bench[r.benchmark].insert(r.algo);
    cells[{r.benchmark, r.seed, r.batch_index}][r.algo] = r.value;
  }

  Rankings out;
  std::map<int, std::map<std::string, std::pair<double, int>>> sums;
  for (const auto& [cell, by_algo] : cells) {
    const auto& [bench, seed, batch] = cell;
    const std::set<std::string>& expected = algos_per_bench[bench];
    if (by_algo.size() != expected.size()) {
      out.warnings.push_back("skipping incomplete cell benchmark=" + bench + " seed=" + std::to_string(seed) +
                             " batch=" + std::to_string(batch));
      continue;
    }
    std::vector<std::string> names;
    std::vector<double> values;
    for (const auto& [algo, v] : by_algo) {
      names.push_back(algo);
      values.push_back(v);
    }
    const std::vector<double> ranks = fractional_ranks(values, higher);
    for (std::size_t i = 0; i < names.size(); ++i) {
      auto& acc = sums[batch][names[i]];
      acc.first += ranks[i];
      acc.second += 1;
    }
  }
  for (const auto& [batch, by_algo] : sums) {
    for (const auto& [algo, acc] : by_algo) out.mean_rank[batch][algo] = acc.first / acc.second;
  }
  return out;
}

}  // namespace hipe
