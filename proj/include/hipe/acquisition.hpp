// Information-theoretic acquisition functions for batch initialization.
//
// Every acquisition is a deterministic function of the candidate batch once an
// AcqContext is built: the hyperparameter ensemble, the test points and the
// standard-normal base draws used by the mixture-entropy estimator are all
// frozen inside the context (sample average approximation). All functions
// optionally return the gradient with respect to the q x D batch.
#pragma once

#include "hipe/batch_optimizer.hpp"
#include "hipe/gp_core.hpp"
#include "hipe/hyper_inference.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hipe {

enum class AcqKind { kBald, kEpig, kNipv, kHipe };

AcqKind parse_acq_kind(const std::string& name);
std::string to_string(AcqKind kind);

/// Estimator of BALD from the stratified mixture draws Y_n.
enum class BaldConditional {
  kLabelEntropy,  // log M - H[theta | Y_n] averaged over draws; never negative
  kClosedForm,    // mixture entropy minus the average Gaussian entropy of the per-sample predictives
  kMonteCarlo,    // mixture entropy minus the average -log p(Y_n | theta) of the drawing component
};

struct AcqOptions {
  /// Entropies over noisy outcomes y rather than latent f.
  bool noisy_entropies = true;
  /// Same choice for the per-test-point entropies entering beta.
  bool noisy_beta = true;
  BaldConditional bald_conditional = BaldConditional::kLabelEntropy;
  /// Fixed BALD weight; estimated from the ensemble when empty.
  std::optional<double> beta;
  /// Absolute tolerance of the 1-D mixture-entropy quadrature.
  double beta_tolerance = 1e-6;
};

/// Frozen state shared by all acquisition evaluations of one batch
/// optimization. Immutable after construction and safe to share across threads.
class AcqContext {
 public:
  /// base_draws is N x q_max; batches may have at most q_max rows and N must
  /// be at least the ensemble size.
  AcqContext(HyperEnsemble ensemble, Dataset data, Matrix test_points, Matrix base_draws, AcqOptions options = {});

  /// Test points uniform on the unit cube and quasi-random standard-normal
  /// base draws (scrambled Sobol), both from streams derived from seed.
  static AcqContext with_random_draws(HyperEnsemble ensemble, Dataset data, Index num_test, Index num_draws,
                                      Index max_q, std::uint64_t seed, AcqOptions options = {});

  const HyperEnsemble& ensemble() const { return ensemble_; }
  const Dataset& data() const { return data_; }
  const Matrix& test_points() const { return test_points_; }
  const Matrix& base_draws() const { return base_draws_; }
  const AcqOptions& options() const { return options_; }
  Index dim() const { return test_points_.cols(); }
  Index num_models() const { return static_cast<Index>(models_.size()); }
  Index max_q() const { return base_draws_.cols(); }

  const ConditionedGp& model(Index m) const { return models_[static_cast<std::size_t>(m)]; }
  /// (K_DD + s2 I)^-1 K(D, test) for model m, n x T.
  const Matrix& train_solve_test(Index m) const { return train_solve_test_[static_cast<std::size_t>(m)]; }
  /// Latent posterior variance at the test points for model m.
  const Vector& test_variance(Index m) const { return test_variance_[static_cast<std::size_t>(m)]; }
  const Vector& test_mean(Index m) const { return test_mean_[static_cast<std::size_t>(m)]; }

  /// Resolved BALD weight (fixed or estimated once at construction).
  double beta() const { return beta_; }

 private:
  HyperEnsemble ensemble_;
  Dataset data_;
  Matrix test_points_;
  Matrix base_draws_;
  AcqOptions options_;
  std::vector<ConditionedGp> models_;
  std::vector<Matrix> train_solve_test_;
  std::vector<Vector> test_variance_;
  std::vector<Vector> test_mean_;
  double beta_ = 0.0;
};

double bald(const AcqContext& ctx, const Matrix& batch, Matrix* grad = nullptr);
double epig(const AcqContext& ctx, const Matrix& batch, Matrix* grad = nullptr);
double nipv(const AcqContext& ctx, const Matrix& batch, Matrix* grad = nullptr);
/// epig + beta * bald, with beta = ctx.beta().
double hipe(const AcqContext& ctx, const Matrix& batch, Matrix* grad = nullptr);
/// epig + beta * bald for an explicit beta, sharing one pass over the ensemble.
double hipe_weighted(const AcqContext& ctx, const Matrix& batch, double beta, Matrix* grad = nullptr);

/// Mutual information between hyperparameters and test outcomes, averaged over
/// the test points; does not depend on any batch. Clamped at zero.
double estimate_beta(const AcqContext& ctx);

/// Entropy (nats) of a 1-D equal-weight Gaussian mixture by adaptive quadrature.
double mixture_entropy_1d(const Vector& means, const Vector& variances, double tolerance = 1e-6);

double evaluate_acquisition(AcqKind kind, const AcqContext& ctx, const Matrix& batch, Matrix* grad = nullptr);

/// Objective handle over a shared, frozen context.
Objective make_acquisition(AcqKind kind, std::shared_ptr<const AcqContext> ctx);

struct OracleEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Nested Monte Carlo estimate of E_{x*}[EIG(y(x*), theta; X)], the expected
/// information gained jointly about test outcomes and hyperparameters. The
/// outer loop samples (theta, y(X)); the inner loop estimates the joint
/// entropy of (y(x*), theta) before and after conditioning. Reference
/// estimator for small instances only (q <= 2, M <= 4, T <= 32).
OracleEstimate joint_eig_oracle(const AcqContext& ctx, const Matrix& batch, int n_outer, int n_inner,
                                std::uint64_t seed = 0);

}  // namespace hipe
