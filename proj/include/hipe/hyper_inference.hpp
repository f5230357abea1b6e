// Hyperpriors and MCMC over GP hyperparameters.
#pragma once

#include "hipe/gp_core.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace hipe {

class InferenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Signal variance is either held fixed or given a log-normal prior.
struct SignalVarPrior {
  bool fixed = true;
  double value = 1.0;
  double logmean = 0.0;
  double logsd = 1.0;
};

/// Log-normal priors on lengthscales and on the noise standard deviation,
/// normal prior on the constant mean.
struct HyperPriorSpec {
  Index dim = 1;
  double lengthscale_logmean = 0.75;
  double lengthscale_logsd = 0.75;
  double noise_sd_logmean = -5.5;
  double noise_sd_logsd = 0.75;
  double mean_prior_mean = 0.0;
  double mean_prior_var = 0.25;
  SignalVarPrior signal;

  /// Dimension-scaled defaults: lengthscale log-mean = base + ln(D)/2.
  static HyperPriorSpec defaults(Index dim, double lengthscale_base = 0.75);
  void validate() const;
};

/// Sum of the log-densities of every hyperparameter in its natural
/// parameterization (log-normal Jacobians included).
double log_prior(const HyperSample& hyper, const HyperPriorSpec& spec);

struct McmcSchedule {
  int burn_in = 192;
  int draws = 288;
  int thin = 24;

  int num_samples() const { return thin > 0 ? draws / thin : 0; }
  void validate() const;
};

enum class EnsembleSource { kPrior, kPosterior };

struct ChainDiagnostics {
  /// Mean number of log-density evaluations per slice update.
  double evals_per_update = 0.0;
  /// Final adapted slice width per coordinate.
  std::vector<double> slice_widths;
  /// Log posterior of each retained sample.
  std::vector<double> log_posteriors;
  int non_finite_evals = 0;
};

/// M hyperparameter samples that together stand in for p(theta | D).
struct HyperEnsemble {
  std::vector<HyperSample> samples;
  EnsembleSource source = EnsembleSource::kPrior;
  KernelFamily kernel = KernelFamily::kMatern52;
  ChainDiagnostics diagnostics;

  Index size() const { return static_cast<Index>(samples.size()); }
  Index dim() const { return samples.empty() ? 0 : samples.front().dim(); }
  void validate() const;
};

/// Coordinate-wise slice sampling of the hyperparameter posterior in
/// unconstrained coordinates (log lengthscales, log noise sd, mean constant,
/// and log signal sd when it is not fixed). With empty data the chain
/// targets the prior. Deterministic given the seed.
HyperEnsemble sample_ensemble(const Dataset& data, const HyperPriorSpec& spec, const McmcSchedule& schedule,
                              std::uint64_t seed, KernelFamily kernel = KernelFamily::kMatern52);

/// Independent draws from the prior (no chain).
HyperEnsemble sample_prior(const HyperPriorSpec& spec, int count, std::uint64_t seed,
                           KernelFamily kernel = KernelFamily::kMatern52);

}  // namespace hipe
