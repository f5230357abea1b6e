#include "hipe/gp_core.hpp"

#include <cmath>
#include <numbers>
#include <utility>

namespace hipe {

namespace {

constexpr double kSqrt5 = 2.23606797749978969640917366873127623544;
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

void check_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw std::invalid_argument(std::string(what) + " contains non-finite values");
  }
}

// Inputs divided by their lengthscales, so distances become plain Euclidean.
Matrix scaled(const Matrix& x, const Vector& lengthscales) {
  return x.array().rowwise() / lengthscales.transpose().array();
}

double kernel_profile(double r2, KernelFamily kernel) {
  if (kernel == KernelFamily::kRbf) {
    return std::exp(-0.5 * r2);
  }
  const double r = std::sqrt(r2);
  return (1.0 + kSqrt5 * r + (5.0 / 3.0) * r2) * std::exp(-kSqrt5 * r);
}

// -(1/r) d kappa / d r, which multiplies (a_d - b_d) / l_d^2 in the gradient.
double kernel_radial_slope(double r2, KernelFamily kernel) {
  if (kernel == KernelFamily::kRbf) {
    return std::exp(-0.5 * r2);
  }
  const double r = std::sqrt(r2);
  return (5.0 / 3.0) * (1.0 + kSqrt5 * r) * std::exp(-kSqrt5 * r);
}

}  // namespace

KernelFamily parse_kernel_family(const std::string& name) {
  if (name == "matern52") return KernelFamily::kMatern52;
  if (name == "rbf") return KernelFamily::kRbf;
  throw std::invalid_argument("unknown kernel family '" + name + "'");
}

std::string to_string(KernelFamily kernel) {
  return kernel == KernelFamily::kRbf ? "rbf" : "matern52";
}

double HyperSample::effective_noise_var() const { return std::max(noise_var, kNoiseVarFloor); }

void HyperSample::validate() const {
  if (lengthscales.size() == 0) {
    throw std::invalid_argument("hyper sample has no lengthscales");
  }
  for (Index d = 0; d < lengthscales.size(); ++d) {
    if (!std::isfinite(lengthscales(d)) || lengthscales(d) <= 0.0) {
      throw std::invalid_argument("lengthscales must be positive and finite");
    }
  }
  if (!std::isfinite(noise_var) || noise_var < 0.0) {
    throw std::invalid_argument("noise variance must be finite and non-negative");
  }
  if (!std::isfinite(signal_var) || signal_var <= 0.0) {
    throw std::invalid_argument("signal variance must be positive and finite");
  }
  if (!std::isfinite(mean_const)) {
    throw std::invalid_argument("mean constant must be finite");
  }
}

Dataset Dataset::empty(Index dim) { return Dataset{Matrix(0, dim), Vector(0)}; }

void Dataset::append(const Matrix& x, const Vector& y) {
  if (x.rows() != y.size()) {
    throw std::invalid_argument("append: row count and outcome count differ");
  }
  if (points.rows() > 0 && x.cols() != points.cols()) {
    throw std::invalid_argument("append: dimension mismatch");
  }
  Matrix new_points(points.rows() + x.rows(), x.cols());
  new_points << points, x;
  Vector new_outcomes(outcomes.size() + y.size());
  new_outcomes << outcomes, y;
  points = std::move(new_points);
  outcomes = std::move(new_outcomes);
}

void Dataset::validate() const {
  if (points.rows() != outcomes.size()) {
    throw std::invalid_argument("dataset: point and outcome counts differ");
  }
  check_finite(points, "dataset points");
  check_finite(outcomes, "dataset outcomes");
  if (points.size() > 0 && (points.minCoeff() < 0.0 || points.maxCoeff() > 1.0)) {
    throw std::invalid_argument("dataset points must lie in the unit cube");
  }
}

double JitteredCholesky::log_det() const { return 2.0 * lower.diagonal().array().log().sum(); }

Matrix JitteredCholesky::solve(const Matrix& rhs) const {
  Matrix out = lower.triangularView<Eigen::Lower>().solve(rhs);
  lower.triangularView<Eigen::Lower>().transpose().solveInPlace(out);
  return out;
}

Matrix JitteredCholesky::inverse() const { return solve(Matrix::Identity(lower.rows(), lower.rows())); }

JitteredCholesky jittered_cholesky(const Matrix& a, double scale, bool start_without_jitter) {
  if (!a.allFinite()) {
    throw NumericalError("cholesky: matrix has non-finite entries");
  }
  const Index n = a.rows();
  if (n == 0) {
    return JitteredCholesky{Matrix(0, 0), 0.0};
  }
  scale = (std::isfinite(scale) && scale > 0.0) ? scale : 1.0;
  double jitter = start_without_jitter ? 0.0 : kJitterRelative * scale;
  const double max_jitter = kJitterRelativeMax * scale * (1.0 + 1e-12);
  for (;;) {
    Matrix shifted = a;
    shifted.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(shifted);
    if (llt.info() == Eigen::Success) {
      Matrix lower = llt.matrixL();
      if (lower.diagonal().minCoeff() > 0.0 && lower.allFinite()) {
        return JitteredCholesky{std::move(lower), jitter};
      }
    }
    jitter = (jitter == 0.0) ? kJitterRelative * scale : jitter * 10.0;
    if (jitter > max_jitter) {
      throw NumericalError("cholesky failed for " + std::to_string(n) + "x" + std::to_string(n) +
                           " matrix after jitter escalation to " + std::to_string(jitter / 10.0) +
                           " (diagonal range " + std::to_string(a.diagonal().minCoeff()) + ".." +
                           std::to_string(a.diagonal().maxCoeff()) + ")");
    }
  }
}

Matrix cholesky_backward(const Matrix& lower, const Matrix& lower_bar) {
  // Only the lower triangle of lower_bar is meaningful.
  const Matrix lower_bar_tri = lower_bar.triangularView<Eigen::Lower>();
  Matrix phi = (lower.transpose() * lower_bar_tri).triangularView<Eigen::Lower>();
  phi.diagonal() *= 0.5;
  // G = L^-T phi L^-1
  Matrix x = lower.triangularView<Eigen::Lower>().transpose().solve(phi);
  Matrix g = lower.triangularView<Eigen::Lower>().transpose().solve(x.transpose()).transpose();
  return 0.5 * (g + g.transpose());
}

Matrix kernel_matrix(const Matrix& a, const Matrix& b, const HyperSample& hyper, KernelFamily kernel) {
  check_finite(a, "kernel input A");
  check_finite(b, "kernel input B");
  hyper.validate();
  if (a.cols() != hyper.dim() || b.cols() != hyper.dim()) {
    throw std::invalid_argument("kernel_matrix: dimension mismatch");
  }
  const Matrix sa = scaled(a, hyper.lengthscales);
  const Matrix sb = scaled(b, hyper.lengthscales);
  Matrix k(a.rows(), b.rows());
  for (Index j = 0; j < sb.rows(); ++j) {
    for (Index i = 0; i < sa.rows(); ++i) {
      const double r2 = (sa.row(i) - sb.row(j)).squaredNorm();
      k(i, j) = hyper.signal_var * kernel_profile(r2, kernel);
    }
  }
  return k;
}

void accumulate_kernel_gradient(const Matrix& a, const Matrix& b, const Matrix& weights, const HyperSample& hyper,
                                KernelFamily kernel, Matrix& grad_a) {
  const Vector inv_l2 = hyper.lengthscales.array().square().inverse();
  const Matrix sa = scaled(a, hyper.lengthscales);
  const Matrix sb = scaled(b, hyper.lengthscales);
  for (Index i = 0; i < a.rows(); ++i) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(a.cols());
    for (Index j = 0; j < b.rows(); ++j) {
      const double w = weights(i, j);
      if (w == 0.0) continue;
      const double r2 = (sa.row(i) - sb.row(j)).squaredNorm();
      const double slope = hyper.signal_var * kernel_radial_slope(r2, kernel);
      acc.noalias() -= (w * slope) * (a.row(i) - b.row(j));
    }
    grad_a.row(i) += acc.cwiseProduct(inv_l2.transpose());
  }
}

ConditionedGp::ConditionedGp(const Dataset& data, HyperSample hyper, KernelFamily kernel)
    : points_(data.points), hyper_(std::move(hyper)), kernel_(kernel) {
  hyper_.validate();
  if (data.points.rows() != data.outcomes.size()) {
    throw std::invalid_argument("ConditionedGp: point and outcome counts differ");
  }
  if (data.size() > 0 && data.dim() != hyper_.dim()) {
    throw std::invalid_argument("ConditionedGp: dataset and hyper dimensions differ");
  }
  if (data.size() == 0) {
    points_ = Matrix(0, hyper_.dim());
    alpha_ = Vector(0);
    return;
  }
  Matrix gram = kernel_matrix(points_, points_, hyper_, kernel_);
  gram.diagonal().array() += hyper_.effective_noise_var();
  chol_ = jittered_cholesky(gram, hyper_.signal_var, /*start_without_jitter=*/true);
  alpha_ = chol_.solve((data.outcomes.array() - hyper_.mean_const).matrix());
}

Matrix ConditionedGp::solve(const Matrix& rhs) const { return chol_.solve(rhs); }

Vector ConditionedGp::mean(const Matrix& query) const {
  Vector mu = Vector::Constant(query.rows(), hyper_.mean_const);
  if (num_train() > 0) {
    mu.noalias() += kernel_matrix(query, points_, hyper_, kernel_) * alpha_;
  }
  return mu;
}

Vector ConditionedGp::variance(const Matrix& query, bool include_noise) const {
  Vector var = Vector::Constant(query.rows(), hyper_.signal_var);
  if (num_train() > 0) {
    const Matrix kdq = kernel_matrix(points_, query, hyper_, kernel_);
    const Matrix half = chol_.lower.triangularView<Eigen::Lower>().solve(kdq);
    var -= half.colwise().squaredNorm().transpose();
  }
  var = var.cwiseMax(0.0);
  if (include_noise) var.array() += hyper_.effective_noise_var();
  return var;
}

PosteriorGaussian ConditionedGp::predict(const Matrix& query, bool include_noise) const {
  if (query.rows() == 0) {
    throw std::invalid_argument("posterior: query set is empty");
  }
  PosteriorGaussian out;
  Matrix kqq = kernel_matrix(query, query, hyper_, kernel_);
  if (num_train() == 0) {
    out.mean = Vector::Constant(query.rows(), hyper_.mean_const);
    out.covariance = std::move(kqq);
  } else {
    const Matrix kdq = kernel_matrix(points_, query, hyper_, kernel_);
    const Matrix half = chol_.lower.triangularView<Eigen::Lower>().solve(kdq);
    out.mean = Vector::Constant(query.rows(), hyper_.mean_const) + kdq.transpose() * alpha_;
    out.covariance = kqq - half.transpose() * half;
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  }
  if (include_noise) {
    out.covariance.diagonal().array() += hyper_.effective_noise_var();
  }
  return out;
}

BatchPosterior ConditionedGp::batch_posterior(const Matrix& batch, bool include_noise) const {
  BatchPosterior out;
  out.covariance = kernel_matrix(batch, batch, hyper_, kernel_);
  out.mean = Vector::Constant(batch.rows(), hyper_.mean_const);
  if (num_train() > 0) {
    out.cross = kernel_matrix(batch, points_, hyper_, kernel_);
    out.cross_solve = chol_.solve(out.cross.transpose()).transpose();
    out.mean.noalias() += out.cross * alpha_;
    out.covariance.noalias() -= out.cross_solve * out.cross.transpose();
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  } else {
    out.cross = Matrix(batch.rows(), 0);
    out.cross_solve = Matrix(batch.rows(), 0);
  }
  if (include_noise) {
    out.covariance.diagonal().array() += hyper_.effective_noise_var();
  }
  return out;
}

void ConditionedGp::batch_posterior_backward(const Matrix& batch, const BatchPosterior& post, const Vector& mean_bar,
                                             const Matrix& cov_bar, const Matrix& cross_bar, Matrix& grad) const {
  const Matrix sym = cov_bar + cov_bar.transpose();
  accumulate_kernel_gradient(batch, batch, sym, hyper_, kernel_, grad);
  if (num_train() == 0) return;
  Matrix kbd_bar = -2.0 * (0.5 * sym) * post.cross_solve;
  if (mean_bar.size() > 0) kbd_bar.noalias() += mean_bar * alpha_.transpose();
  if (cross_bar.size() > 0) kbd_bar += cross_bar;
  accumulate_kernel_gradient(batch, points_, kbd_bar, hyper_, kernel_, grad);
}

PosteriorGaussian posterior(const Dataset& data, const HyperSample& hyper, const Matrix& query, bool include_noise,
                            KernelFamily kernel) {
  return ConditionedGp(data, hyper, kernel).predict(query, include_noise);
}

Vector fantasy_variance(const Dataset& data, const HyperSample& hyper, const Matrix& batch, const Matrix& test,
                        bool include_noise, KernelFamily kernel) {
  if (batch.rows() == 0) {
    throw std::invalid_argument("fantasy_variance: batch is empty");
  }
  const ConditionedGp gp(data, hyper, kernel);
  const BatchPosterior bp = gp.batch_posterior(batch, /*include_noise=*/true);
  const JitteredCholesky lc = jittered_cholesky(bp.covariance, hyper.signal_var, /*start_without_jitter=*/true);
  Matrix cross_bt = kernel_matrix(batch, test, hyper, kernel);
  if (gp.num_train() > 0) {
    cross_bt.noalias() -= bp.cross_solve * kernel_matrix(data.points, test, hyper, kernel);
  }
  const Matrix half = lc.lower.triangularView<Eigen::Lower>().solve(cross_bt);
  Vector var = gp.variance(test, false) - half.colwise().squaredNorm().transpose();
  var = var.cwiseMax(0.0);
  if (include_noise) var.array() += hyper.effective_noise_var();
  return var;
}

double gaussian_entropy(const Matrix& cov) {
  if (cov.rows() != cov.cols() || cov.rows() == 0) {
    throw std::invalid_argument("gaussian_entropy: covariance must be square and non-empty");
  }
  const double scale = cov.diagonal().cwiseAbs().mean();
  const JitteredCholesky chol = jittered_cholesky(cov, scale, /*start_without_jitter=*/true);
  const double m = static_cast<double>(cov.rows());
  return 0.5 * (m * (kLog2Pi + 1.0) + chol.log_det());
}

double log_marginal_likelihood(const Dataset& data, const HyperSample& hyper, KernelFamily kernel) {
  if (data.size() == 0) {
    throw std::invalid_argument("log_marginal_likelihood: dataset is empty");
  }
  hyper.validate();
  Matrix gram = kernel_matrix(data.points, data.points, hyper, kernel);
  gram.diagonal().array() += hyper.effective_noise_var();
  const JitteredCholesky chol = jittered_cholesky(gram, hyper.signal_var, /*start_without_jitter=*/true);
  const Vector resid = data.outcomes.array() - hyper.mean_const;
  const Vector half = chol.lower.triangularView<Eigen::Lower>().solve(resid);
  const double n = static_cast<double>(data.size());
  return -0.5 * half.squaredNorm() - 0.5 * chol.log_det() - 0.5 * n * kLog2Pi;
}

Standardizer Standardizer::fit(const Vector& outcomes) {
  Standardizer s;
  if (outcomes.size() < 2) return s;
  s.offset = outcomes.mean();
  const double var = (outcomes.array() - s.offset).square().sum() / static_cast<double>(outcomes.size() - 1);
  s.scale = var > 0.0 ? std::sqrt(var) : 1.0;
  return s;
}

Vector Standardizer::apply(const Vector& outcomes) const { return (outcomes.array() - offset) / scale; }

Dataset Standardizer::apply(const Dataset& data) const { return Dataset{data.points, apply(data.outcomes)}; }

}  // namespace hipe
