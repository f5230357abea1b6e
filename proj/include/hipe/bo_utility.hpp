// Batch utility for the BO stage: a smoothed Monte Carlo noisy expected
// improvement, log-transformed and averaged over the hyperparameter ensemble.
#pragma once

#include "hipe/batch_optimizer.hpp"
#include "hipe/gp_core.hpp"
#include "hipe/hyper_inference.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace hipe {

struct NeiOptions {
  /// Softplus and log-sum-exp temperature in standardized outcome units.
  double tau = 1e-3;
  int num_samples = 128;
};

/// For every ensemble member, latent samples at the observed inputs are drawn
/// once; batch values are then drawn from the GP conditioned on those latent
/// values, so the incumbent is shared across candidate batches. Per member
///   u_m(X) = log mean_s softplus_tau(smax_tau f_s(X) - smax_tau f_s(D))
/// and the utility is the mean of u_m. Data must be non-empty and should be
/// on the scale the ensemble was fitted on.
class NeiContext {
 public:
  NeiContext(const HyperEnsemble& ensemble, const Dataset& data, Index max_q, std::uint64_t seed,
             NeiOptions options = {});

  double value(const Matrix& batch, Matrix* grad = nullptr) const;

  Index dim() const { return dim_; }
  Index num_models() const { return static_cast<Index>(members_.size()); }
  const NeiOptions& options() const { return options_; }
  /// Observed input with the highest ensemble-mean posterior mean.
  const Vector& incumbent() const { return incumbent_; }

 private:
  struct Member {
    ConditionedGp latent_gp;   // conditioned on latent values (near-noiseless)
    Matrix solved;             // (K_DD + jitter)^-1 (F_D - c), n x S
    Vector incumbent_smax;     // S
    Matrix batch_draws;        // S x max_q
  };
  Index dim_ = 0;
  NeiOptions options_;
  std::vector<Member> members_;
  Vector incumbent_;
};

Objective make_nei_objective(std::shared_ptr<const NeiContext> ctx);

/// count batches whose points are the incumbent plus N(0, sd^2) noise,
/// clipped to the cube.
std::vector<Matrix> incumbent_perturbations(const Vector& incumbent, int q, int count, double sd,
                                            std::uint64_t seed);

}  // namespace hipe
