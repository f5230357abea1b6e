#include "hipe/batch_optimizer.hpp"

#include "hipe/sobol.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <string>

namespace hipe {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double finite_or_neg_inf(double v) { return std::isfinite(v) ? v : kNegInf; }

VectorXd flatten(const MatrixXd& m) { return Eigen::Map<const VectorXd>(m.data(), m.size()); }

MatrixXd unflatten(const VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const MatrixXd>(v.data(), rows, cols);
}

VectorXd project(const VectorXd& x) { return x.cwiseMax(0.0).cwiseMin(1.0); }

// Gradient step projected back onto the cube, minus the current point.
double projected_gradient_norm(const VectorXd& x, const VectorXd& g_ascent) {
  return (project(x + g_ascent) - x).lpNorm<Eigen::Infinity>();
}

// Variables pinned at a bound whose ascent direction points outwards.
std::vector<bool> active_set(const VectorXd& x, const VectorXd& g_ascent) {
  std::vector<bool> active(static_cast<std::size_t>(x.size()), false);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    active[static_cast<std::size_t>(i)] = (x(i) <= 0.0 && g_ascent(i) < 0.0) || (x(i) >= 1.0 && g_ascent(i) > 0.0);
  }
  return active;
}

}  // namespace

void OptimizerConfig::validate() const {
  if (restarts < 1) throw std::invalid_argument("optimizer: restarts must be positive");
  if (raw_samples < restarts) throw std::invalid_argument("optimizer: raw_samples must be at least restarts");
  if (max_iters < 0) throw std::invalid_argument("optimizer: max_iters must be non-negative");
  if (history < 1) throw std::invalid_argument("optimizer: history must be positive");
  if (!(fd_step > 0.0)) throw std::invalid_argument("optimizer: fd_step must be positive");
  if (!(armijo_c1 > 0.0 && armijo_c1 < 1.0)) throw std::invalid_argument("optimizer: armijo_c1 must be in (0, 1)");
  if (max_backtracks < 1) throw std::invalid_argument("optimizer: max_backtracks must be positive");
}

std::vector<MatrixXd> raw_candidates(int q, int dim, int n, std::uint64_t seed) {
  if (q < 1 || dim < 1 || n < 0) throw std::invalid_argument("raw_candidates: bad shape");
  if (q * dim > SobolSequence::max_dimension()) {
    throw std::invalid_argument("raw_candidates: q*D = " + std::to_string(q * dim) + " exceeds " +
                                std::to_string(SobolSequence::max_dimension()) + " Sobol dimensions");
  }
  const SobolSequence seq(q * dim, /*scramble=*/true, seed);
  const MatrixXd pts = seq.points(0, static_cast<std::uint64_t>(n));
  std::vector<MatrixXd> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    MatrixXd b(q, dim);
    for (int i = 0; i < q; ++i)
      for (int d = 0; d < dim; ++d) b(i, d) = pts(j, i * dim + d);
    out.push_back(std::move(b));
  }
  return out;
}

double value_and_gradient(const Objective& objective, const MatrixXd& x, double fd_step, MatrixXd& grad) {
  grad.resize(0, 0);
  const double value = objective(x, &grad);
  if (grad.size() == x.size()) return value;
  if (grad.size() != 0) throw std::runtime_error("objective returned a gradient of the wrong shape");
  grad.resize(x.rows(), x.cols());
  MatrixXd probe = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double hi = std::min(1.0, x(i, j) + fd_step);
      const double lo = std::max(0.0, x(i, j) - fd_step);
      probe(i, j) = hi;
      const double f_hi = objective(probe, nullptr);
      probe(i, j) = lo;
      const double f_lo = objective(probe, nullptr);
      probe(i, j) = x(i, j);
      grad(i, j) = (f_hi - f_lo) / (hi - lo);
    }
  }
  return value;
}

std::pair<MatrixXd, double> local_maximize(const Objective& objective, const MatrixXd& start,
                                           const OptimizerConfig& cfg, int* iterations, int* evaluations) {
  const Eigen::Index rows = start.rows();
  const Eigen::Index cols = start.cols();
  int evals = 0;
  int iters = 0;

  VectorXd x = project(flatten(start));
  MatrixXd gm;
  double f = value_and_gradient(objective, unflatten(x, rows, cols), cfg.fd_step, gm);
  ++evals;
  if (!std::isfinite(f)) throw std::runtime_error("objective is not finite at the starting batch");
  VectorXd g = flatten(gm);  // ascent direction
  if (!g.allFinite()) throw std::runtime_error("objective gradient is not finite at the starting batch");

  std::deque<std::pair<VectorXd, VectorXd>> memory;  // (s, y) for the minimization of -f
  for (; iters < cfg.max_iters; ++iters) {
    if (projected_gradient_norm(x, g) < cfg.grad_tol) break;

    const std::vector<bool> active = active_set(x, g);
    auto mask = [&](VectorXd v) {
      for (Eigen::Index i = 0; i < v.size(); ++i)
        if (active[static_cast<std::size_t>(i)]) v(i) = 0.0;
      return v;
    };

    // Two-loop recursion on the free variables; direction ascends f.
    VectorXd dir = mask(g);
    std::vector<double> alpha(memory.size());
    for (std::size_t k = memory.size(); k-- > 0;) {
      const VectorXd s = mask(memory[k].first);
      const VectorXd y = mask(memory[k].second);
      const double sy = s.dot(y);
      if (sy <= 0.0) continue;
      alpha[k] = s.dot(dir) / sy;
      dir -= alpha[k] * y;
    }
    if (!memory.empty()) {
      const VectorXd s = mask(memory.back().first);
      const VectorXd y = mask(memory.back().second);
      const double yy = y.squaredNorm();
      if (yy > 0.0 && s.dot(y) > 0.0) dir *= s.dot(y) / yy;
    }
    for (std::size_t k = 0; k < memory.size(); ++k) {
      const VectorXd s = mask(memory[k].first);
      const VectorXd y = mask(memory[k].second);
      const double sy = s.dot(y);
      if (sy <= 0.0) continue;
      dir += (alpha[k] - y.dot(dir) / sy) * s;
    }
    dir = mask(dir);
    if (!(dir.dot(g) > 0.0) || !dir.allFinite()) {
      memory.clear();
      dir = mask(g);
    }

    bool accepted = false;
    VectorXd x_new;
    double f_new = 0.0;
    MatrixXd gm_new;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (attempt == 1) {
        if (memory.empty()) break;
        memory.clear();
        dir = mask(g);
      }
      double step = 1.0;
      for (int bt = 0; bt < cfg.max_backtracks; ++bt, step *= 0.5) {
        x_new = project(x + step * dir);
        const double gain = g.dot(x_new - x);
        if (gain <= 0.0 && (x_new - x).lpNorm<Eigen::Infinity>() == 0.0) break;
        f_new = value_and_gradient(objective, unflatten(x_new, rows, cols), cfg.fd_step, gm_new);
        ++evals;
        if (std::isfinite(f_new) && gm_new.allFinite() && f_new >= f + cfg.armijo_c1 * gain) {
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) break;

    const VectorXd g_new = flatten(gm_new);
    const VectorXd s = x_new - x;
    const VectorXd y = g - g_new;  // gradient difference of -f
    if (s.dot(y) > 1e-10 * s.norm() * y.norm()) {
      memory.emplace_back(s, y);
      if (static_cast<int>(memory.size()) > cfg.history) memory.pop_front();
    }
    const double change = std::abs(f_new - f) / std::max({std::abs(f), std::abs(f_new), 1.0});
    x = x_new;
    f = f_new;
    g = g_new;
    if (change < cfg.rel_tol) {
      ++iters;
      break;
    }
  }

  if (iterations) *iterations = iters;
  if (evaluations) *evaluations = evals;
  return {unflatten(x, rows, cols), f};
}

OptimizationResult optimize_from_candidates(const Objective& objective, const std::vector<MatrixXd>& candidates,
                                            const OptimizerConfig& cfg) {
  cfg.validate();
  if (candidates.empty()) throw std::invalid_argument("optimizer: empty candidate pool");
  OptimizationResult result;
  std::vector<double> scores(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    scores[i] = finite_or_neg_inf(objective(candidates[i], nullptr));
    ++result.evaluations;
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  if (!std::isfinite(scores[order[0]])) throw std::runtime_error("optimizer: objective is not finite at any candidate");

  result.batch = candidates[order[0]];
  result.value = scores[order[0]];
  result.best_raw_value = scores[order[0]];
  result.best_restart = -1;

  const int n_restarts = std::min<int>(cfg.restarts, static_cast<int>(candidates.size()));
  for (int r = 0; r < n_restarts; ++r) {
    const std::size_t idx = order[static_cast<std::size_t>(r)];
    if (!std::isfinite(scores[idx])) break;
    int iters = 0;
    int evals = 0;
    std::pair<MatrixXd, double> local;
    try {
      local = local_maximize(objective, candidates[idx], cfg, &iters, &evals);
    } catch (const std::exception& e) {
      throw RestartError(r, e.what());
    }
    result.total_iterations += iters;
    result.evaluations += evals;
    if (local.second > result.value) {
      result.batch = std::move(local.first);
      result.value = local.second;
      result.best_restart = r;
    }
  }
  return result;
}

OptimizationResult optimize_batch(const Objective& objective, int q, int dim, const OptimizerConfig& cfg,
                                  const std::vector<MatrixXd>& warm_starts) {
  cfg.validate();
  std::vector<MatrixXd> candidates = raw_candidates(q, dim, cfg.raw_samples, cfg.seed);
  for (const MatrixXd& w : warm_starts) {
    if (w.rows() != q || w.cols() != dim) throw std::invalid_argument("optimizer: warm start has the wrong shape");
    candidates.push_back(w.cwiseMax(0.0).cwiseMin(1.0));
  }
  return optimize_from_candidates(objective, candidates, cfg);
}

}  // namespace hipe
