// Multi-start projected quasi-Newton maximization of batch objectives over the
// unit cube.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

namespace hipe {

/// Maps a q x D batch to a scalar to be maximized. When grad is non-null the
/// callee either fills it (q x D) or leaves it empty (size 0) to request
/// finite differences.
using Objective = std::function<double(const Eigen::MatrixXd& batch, Eigen::MatrixXd* grad)>;

struct OptimizerConfig {
  int restarts = 4;
  int raw_samples = 384;
  int max_iters = 200;
  /// Stop when the projected-gradient infinity norm falls below this.
  double grad_tol = 1e-6;
  /// Stop when the relative objective change falls below this.
  double rel_tol = 2.220446049250313e-09;
  int history = 10;
  double armijo_c1 = 1e-4;
  int max_backtracks = 30;
  /// Central finite-difference step when the objective has no gradient.
  double fd_step = 1e-5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct OptimizationResult {
  Eigen::MatrixXd batch;
  double value = 0.0;
  double best_raw_value = 0.0;
  /// Index of the winning restart, or -1 when a raw candidate won.
  int best_restart = -1;
  int total_iterations = 0;
  int evaluations = 0;
};

/// Carries the restart index of a failing local search.
class RestartError : public std::runtime_error {
 public:
  RestartError(int restart, const std::string& what)
      : std::runtime_error("restart " + std::to_string(restart) + ": " + what), restart_(restart) {}
  int restart() const { return restart_; }

 private:
  int restart_;
};

/// n batches whose q*D coordinates are consecutive points of a scrambled
/// Sobol stream in [0,1]^(qD), reshaped row by row into q x D.
std::vector<Eigen::MatrixXd> raw_candidates(int q, int dim, int n, std::uint64_t seed);

/// Scores the raw candidates plus any warm starts, runs local searches from
/// the best `restarts` of them and returns the best batch seen.
OptimizationResult optimize_batch(const Objective& objective, int q, int dim, const OptimizerConfig& cfg,
                                  const std::vector<Eigen::MatrixXd>& warm_starts = {});

/// Same, with an explicit candidate pool instead of Sobol raw samples.
OptimizationResult optimize_from_candidates(const Objective& objective, const std::vector<Eigen::MatrixXd>& candidates,
                                            const OptimizerConfig& cfg);

/// Projected L-BFGS from a single start. Returns the final batch and value.
std::pair<Eigen::MatrixXd, double> local_maximize(const Objective& objective, const Eigen::MatrixXd& start,
                                                  const OptimizerConfig& cfg, int* iterations = nullptr,
                                                  int* evaluations = nullptr);

/// Value and gradient, falling back to central differences when the objective
/// does not provide a gradient.
double value_and_gradient(const Objective& objective, const Eigen::MatrixXd& x, double fd_step,
                          Eigen::MatrixXd& grad);

}  // namespace hipe
