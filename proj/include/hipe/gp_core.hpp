// Exact Gaussian-process regression primitives.
//
// Conventions used throughout the library:
//   * point sets are row-major in the mathematical sense: an r x D matrix holds
//     r points of dimension D, every coordinate in the unit cube;
//   * kernels are stationary ARD kernels with per-dimension lengthscales;
//   * observation noise is homoscedastic Gaussian with variance noise_var.
#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace hipe {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Raised when a factorization fails even after the maximum jitter.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class KernelFamily { kMatern52, kRbf };

KernelFamily parse_kernel_family(const std::string& name);
std::string to_string(KernelFamily kernel);

/// Lower bound applied to every noise variance.
inline constexpr double kNoiseVarFloor = 1e-10;
/// Diagonal jitter, relative to the signal variance, and its escalation cap.
inline constexpr double kJitterRelative = 1e-8;
inline constexpr double kJitterRelativeMax = 1e-4;

/// One draw of GP hyperparameters.
struct HyperSample {
  Vector lengthscales;
  double noise_var = 1e-4;
  double signal_var = 1.0;
  double mean_const = 0.0;

  Index dim() const { return lengthscales.size(); }
  /// Noise variance with the floor applied.
  double effective_noise_var() const;
  /// Throws std::invalid_argument when any field is out of its domain.
  void validate() const;
};

/// Observed inputs in [0,1]^D and their (possibly noisy) scalar outcomes.
struct Dataset {
  Matrix points;
  Vector outcomes;

  static Dataset empty(Index dim);

  Index size() const { return points.rows(); }
  Index dim() const { return points.cols(); }
  bool is_empty() const { return points.rows() == 0; }
  void append(const Matrix& x, const Vector& y);
  void validate() const;
};

struct PosteriorGaussian {
  Vector mean;
  Matrix covariance;
};

/// Cholesky factor of a matrix plus the diagonal jitter it needed.
struct JitteredCholesky {
  Matrix lower;
  double jitter = 0.0;

  double log_det() const;
  /// Solves (A + jitter I) x = rhs.
  Matrix solve(const Matrix& rhs) const;
  Matrix inverse() const;
};

/// Factorizes a + jitter*I. Jitter starts at kJitterRelative*scale (or at
/// zero when start_without_jitter is set) and escalates by 10x up to
/// kJitterRelativeMax*scale before a NumericalError is raised.
JitteredCholesky jittered_cholesky(const Matrix& a, double scale, bool start_without_jitter = false);

/// Adjoint of a symmetric matrix A = L L^T given the adjoint of L. The result
/// is symmetric and pairs with symmetric perturbations of A.
Matrix cholesky_backward(const Matrix& lower, const Matrix& lower_bar);

/// Matern-5/2 (or RBF) ARD kernel matrix between the rows of a and b.
Matrix kernel_matrix(const Matrix& a, const Matrix& b, const HyperSample& hyper,
                     KernelFamily kernel = KernelFamily::kMatern52);

/// grad_a.row(i) += sum_j weights(i, j) * d k(a_i, b_j) / d a_i
void accumulate_kernel_gradient(const Matrix& a, const Matrix& b, const Matrix& weights,
                                const HyperSample& hyper, KernelFamily kernel, Matrix& grad_a);

/// Posterior of a batch of inputs, kept together with the intermediate
/// products needed to differentiate it with respect to the batch.
struct BatchPosterior {
  Matrix cross;       // K(B, D), q x n
  Matrix cross_solve; // K(B, D) (K_DD + s2 I)^-1, q x n
  Vector mean;        // q
  Matrix covariance;  // q x q, noisy when requested
};

/// A GP conditioned on a fixed dataset under one hyperparameter sample. The
/// factorization of the training Gram matrix is computed once and reused.
class ConditionedGp {
 public:
  ConditionedGp(const Dataset& data, HyperSample hyper, KernelFamily kernel = KernelFamily::kMatern52);

  const HyperSample& hyper() const { return hyper_; }
  KernelFamily kernel() const { return kernel_; }
  const Matrix& train_points() const { return points_; }
  Index num_train() const { return points_.rows(); }
  /// (K_DD + s2 I)^-1 (y - c)
  const Vector& alpha() const { return alpha_; }

  /// (K_DD + s2 I)^-1 rhs; rhs has n rows.
  Matrix solve(const Matrix& rhs) const;
  Vector mean(const Matrix& query) const;
  /// Latent posterior variances (diagonal only), optionally plus noise.
  Vector variance(const Matrix& query, bool include_noise) const;
  PosteriorGaussian predict(const Matrix& query, bool include_noise) const;

  BatchPosterior batch_posterior(const Matrix& batch, bool include_noise) const;
  /// Propagates adjoints of a batch posterior back to the batch inputs.
  /// cross_bar is an additional adjoint on K(B, D) (may be empty).
  void batch_posterior_backward(const Matrix& batch, const BatchPosterior& post, const Vector& mean_bar,
                                const Matrix& cov_bar, const Matrix& cross_bar, Matrix& grad) const;

 private:
  Matrix points_;
  HyperSample hyper_;
  KernelFamily kernel_;
  JitteredCholesky chol_;
  Vector alpha_;
};

PosteriorGaussian posterior(const Dataset& data, const HyperSample& hyper, const Matrix& query, bool include_noise,
                            KernelFamily kernel = KernelFamily::kMatern52);

/// Posterior variance of f at each test point after additionally conditioning
/// on noisy observations at the batch inputs. Outcome values are not needed.
Vector fantasy_variance(const Dataset& data, const HyperSample& hyper, const Matrix& batch, const Matrix& test,
                        bool include_noise = false, KernelFamily kernel = KernelFamily::kMatern52);

/// Differential entropy (nats) of a multivariate normal with covariance cov.
double gaussian_entropy(const Matrix& cov);

/// log N(y; c 1, K + s2 I)
double log_marginal_likelihood(const Dataset& data, const HyperSample& hyper,
                               KernelFamily kernel = KernelFamily::kMatern52);

/// Affine outcome standardization. Identity when fewer than two outcomes.
struct Standardizer {
  double offset = 0.0;
  double scale = 1.0;

  static Standardizer fit(const Vector& outcomes);
  Vector apply(const Vector& outcomes) const;
  Dataset apply(const Dataset& data) const;
  double restore_mean(double mean) const { return mean * scale + offset; }
  double restore_variance(double var) const { return var * scale * scale; }
};

}  // namespace hipe
