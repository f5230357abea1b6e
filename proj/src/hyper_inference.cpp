#include "hipe/hyper_inference.hpp"

#include "hipe/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace hipe {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double normal_logpdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - kHalfLog2Pi;
}

double lognormal_logpdf(double x, double logmean, double logsd) {
  return normal_logpdf(std::log(x), logmean, logsd) - std::log(x);
}

// Unconstrained coordinates: [log l_1..D, log noise_sd, mean_const, (log signal_var)].
struct Coordinates {
  Index dim;
  bool free_signal;

  Index size() const { return dim + 2 + (free_signal ? 1 : 0); }

  HyperSample to_hyper(const Vector& u, double fixed_signal) const {
    HyperSample h;
    h.lengthscales = u.head(dim).array().exp();
    h.noise_var = std::max(std::exp(2.0 * u(dim)), kNoiseVarFloor);
    h.mean_const = u(dim + 1);
    h.signal_var = free_signal ? std::exp(u(dim + 2)) : fixed_signal;
    return h;
  }

  // Box outside which the target is treated as zero, to keep exp() finite.
  bool in_support(const Vector& u) const {
    for (Index d = 0; d < dim; ++d)
      if (u(d) < -12.0 || u(d) > 12.0) return false;
    if (u(dim) < 0.5 * std::log(kNoiseVarFloor) || u(dim) > 6.0) return false;
    if (std::abs(u(dim + 1)) > 50.0) return false;
    if (free_signal && std::abs(u(dim + 2)) > 15.0) return false;
    return true;
  }
};

class LogTarget {
 public:
  LogTarget(const Dataset& data, const HyperPriorSpec& spec, KernelFamily kernel)
      : data_(data), spec_(spec), kernel_(kernel), coords_{spec.dim, !spec.signal.fixed} {}

  const Coordinates& coords() const { return coords_; }

  HyperSample hyper(const Vector& u) const { return coords_.to_hyper(u, spec_.signal.value); }

  double operator()(const Vector& u) {
    ++evals_;
    if (!coords_.in_support(u)) return kNegInf;
    const HyperSample h = hyper(u);
    // Prior in natural parameters plus the log-Jacobian of the exp transforms.
    double lp = log_prior(h, spec_) + u.head(coords_.dim).sum() + u(coords_.dim);
    if (coords_.free_signal) lp += u(coords_.dim + 2);
    if (data_.size() > 0) {
      try {
        lp += log_marginal_likelihood(data_, h, kernel_);
      } catch (const NumericalError&) {
        lp = kNegInf;
      }
    }
    if (!std::isfinite(lp)) {
      ++non_finite_;
      return kNegInf;
    }
    return lp;
  }

  long evals() const { return evals_; }
  int non_finite() const { return non_finite_; }

 private:
  const Dataset& data_;
  const HyperPriorSpec& spec_;
  KernelFamily kernel_;
  Coordinates coords_;
  long evals_ = 0;
  int non_finite_ = 0;
};

// One univariate slice-sampling update of coordinate i with stepping out.
double slice_update(LogTarget& target, Vector& u, double current_lp, Index i, double width, Rng& rng) {
  constexpr int kMaxSteps = 32;
  const double log_y = current_lp + std::log1p(-uniform01(rng));  // log(u * f), u in (0, 1]
  const double x0 = u(i);
  double left = x0 - width * uniform01(rng);
  double right = left + width;
  const int j_max = static_cast<int>(kMaxSteps * uniform01(rng));
  int k_max = kMaxSteps - 1 - j_max;
  auto eval_at = [&](double x) {
    u(i) = x;
    return target(u);
  };
  for (int j = j_max; j > 0 && eval_at(left) > log_y; --j) left -= width;
  for (; k_max > 0 && eval_at(right) > log_y; --k_max) right += width;
  for (int shrink = 0; shrink < 200; ++shrink) {
    const double x1 = left + (right - left) * uniform01(rng);
    const double lp = eval_at(x1);
    if (lp > log_y) return lp;
    if (x1 < x0) left = x1; else right = x1;
  }
  u(i) = x0;
  return current_lp;
}

}  // namespace

HyperPriorSpec HyperPriorSpec::defaults(Index dim, double lengthscale_base) {
  HyperPriorSpec spec;
  spec.dim = dim;
  spec.lengthscale_logmean = lengthscale_base + 0.5 * std::log(static_cast<double>(dim));
  return spec;
}

void HyperPriorSpec::validate() const {
  if (dim < 1) throw std::invalid_argument("prior spec: dim must be >= 1");
  if (!(lengthscale_logsd > 0.0) || !(noise_sd_logsd > 0.0) || !(mean_prior_var > 0.0)) {
    throw std::invalid_argument("prior spec: scale parameters must be positive");
  }
  if (signal.fixed ? !(signal.value > 0.0) : !(signal.logsd > 0.0)) {
    throw std::invalid_argument("prior spec: invalid signal variance prior");
  }
}

double log_prior(const HyperSample& hyper, const HyperPriorSpec& spec) {
  hyper.validate();
  if (hyper.dim() != spec.dim) {
    throw std::invalid_argument("log_prior: dimension mismatch");
  }
  double lp = 0.0;
  for (Index d = 0; d < hyper.dim(); ++d) {
    lp += lognormal_logpdf(hyper.lengthscales(d), spec.lengthscale_logmean, spec.lengthscale_logsd);
  }
  lp += lognormal_logpdf(std::sqrt(hyper.effective_noise_var()), spec.noise_sd_logmean, spec.noise_sd_logsd);
  lp += normal_logpdf(hyper.mean_const, spec.mean_prior_mean, std::sqrt(spec.mean_prior_var));
  if (!spec.signal.fixed) {
    lp += lognormal_logpdf(hyper.signal_var, spec.signal.logmean, spec.signal.logsd);
  }
  return lp;
}

void McmcSchedule::validate() const {
  if (burn_in < 0 || draws < 1 || thin < 1 || num_samples() < 1) {
    throw std::invalid_argument("mcmc schedule must retain at least one sample (draws / thin >= 1)");
  }
}

void HyperEnsemble::validate() const {
  if (samples.empty()) throw std::invalid_argument("hyper ensemble is empty");
  for (const auto& s : samples) {
    s.validate();
    if (s.dim() != dim()) throw std::invalid_argument("hyper ensemble has mixed dimensions");
  }
}

HyperEnsemble sample_ensemble(const Dataset& data, const HyperPriorSpec& spec, const McmcSchedule& schedule,
                              std::uint64_t seed, KernelFamily kernel) {
  spec.validate();
  schedule.validate();
  if (data.size() > 0 && data.dim() != spec.dim) {
    throw std::invalid_argument("sample_ensemble: data and prior dimensions differ");
  }
  Rng rng(seed);
  LogTarget target(data, spec, kernel);
  const Coordinates& coords = target.coords();
  const Index p = coords.size();

  Vector u(p);
  u.head(spec.dim).setConstant(spec.lengthscale_logmean);
  u(spec.dim) = spec.noise_sd_logmean;
  u(spec.dim + 1) = spec.mean_prior_mean;
  if (coords.free_signal) u(spec.dim + 2) = spec.signal.logmean;

  double lp = target(u);
  Vector width = Vector::Ones(p);
  Vector jump_sum = Vector::Zero(p);
  long updates = 0;

  auto sweep = [&](Vector& state, double& state_lp, Vector& w, Vector& jumps) {
    for (Index i = 0; i < p; ++i) {
      const double before = state(i);
      state_lp = slice_update(target, state, state_lp, i, w(i), rng);
      jumps(i) += std::abs(state(i) - before);
      ++updates;
    }
  };

  // Two pilot chains, from the prior median and from the best of a coarse grid over noise
  // level and lengthscale scale, each for half the burn-in. The main chain continues from
  // whichever pilot ends higher.
  int pilot_sweeps = 0;
  if (data.size() > 0) {
    Vector grid_best = u;
    double grid_lp = kNegInf;
    for (double noise_sd : {0.05, 0.2, 0.5, 0.9}) {
      for (double scale : {0.5, 1.0, 2.0}) {
        Vector v = u;
        v.head(spec.dim).array() += std::log(scale);
        v(spec.dim) = std::log(noise_sd);
        const double cand = target(v);
        if (cand > grid_lp) {
          grid_lp = cand;
          grid_best = v;
        }
      }
    }
    pilot_sweeps = schedule.burn_in / 2;
    std::vector<Vector> states = {u, grid_best};
    std::vector<double> lps = {lp, grid_lp};
    std::vector<Vector> widths(2, Vector::Ones(p));
    for (std::size_t c = 0; c < 2; ++c) {
      if (!std::isfinite(lps[c])) continue;
      Vector jumps = Vector::Zero(p);
      for (int it = 0; it < pilot_sweeps; ++it) {
        sweep(states[c], lps[c], widths[c], jumps);
        if ((it + 1) % 16 == 0) {
          widths[c] = (2.0 * jumps / 16.0).cwiseMax(1e-3).cwiseMin(10.0);
          jumps.setZero();
        }
      }
    }
    const std::size_t pick = lps[1] > lps[0] ? 1 : 0;
    u = states[pick];
    lp = lps[pick];
    width = widths[pick];
  }
  if (!std::isfinite(lp)) {
    throw InferenceError("sample_ensemble: non-finite log posterior at the initial state");
  }

  HyperEnsemble out;
  out.source = data.size() > 0 ? EnsembleSource::kPosterior : EnsembleSource::kPrior;
  out.kernel = kernel;

  const int total = schedule.burn_in + schedule.draws;
  for (int it = pilot_sweeps; it < total; ++it) {
    sweep(u, lp, width, jump_sum);
    // Width adaptation during burn-in only, so retained draws come from a fixed kernel.
    if (it < schedule.burn_in && (it + 1 - pilot_sweeps) % 16 == 0) {
      width = (2.0 * jump_sum / 16.0).cwiseMax(1e-3).cwiseMin(10.0);
      jump_sum.setZero();
    }
    if (target.non_finite() > 1000 && target.non_finite() * 2 > target.evals()) {
      throw InferenceError("sample_ensemble: chain diverged (" + std::to_string(target.non_finite()) + " of " +
                           std::to_string(target.evals()) + " log-posterior evaluations non-finite)");
    }
    const int draw = it - schedule.burn_in + 1;
    if (draw > 0 && draw % schedule.thin == 0 && static_cast<int>(out.samples.size()) < schedule.num_samples()) {
      out.samples.push_back(target.hyper(u));
      out.diagnostics.log_posteriors.push_back(lp);
    }
  }
  out.diagnostics.evals_per_update = static_cast<double>(target.evals()) / static_cast<double>(std::max(1L, updates));
  out.diagnostics.slice_widths.assign(width.data(), width.data() + width.size());
  out.diagnostics.non_finite_evals = target.non_finite();
  return out;
}

HyperEnsemble sample_prior(const HyperPriorSpec& spec, int count, std::uint64_t seed, KernelFamily kernel) {
  spec.validate();
  if (count < 1) throw std::invalid_argument("sample_prior: count must be >= 1");
  Rng rng(seed);
  HyperEnsemble out;
  out.source = EnsembleSource::kPrior;
  out.kernel = kernel;
  for (int k = 0; k < count; ++k) {
    HyperSample h;
    h.lengthscales.resize(spec.dim);
    for (Index d = 0; d < spec.dim; ++d) {
      h.lengthscales(d) = std::exp(spec.lengthscale_logmean + spec.lengthscale_logsd * standard_normal(rng));
    }
    const double noise_sd = std::exp(spec.noise_sd_logmean + spec.noise_sd_logsd * standard_normal(rng));
    h.noise_var = std::max(noise_sd * noise_sd, kNoiseVarFloor);
    h.mean_const = spec.mean_prior_mean + std::sqrt(spec.mean_prior_var) * standard_normal(rng);
    h.signal_var = spec.signal.fixed ? spec.signal.value
                                     : std::exp(spec.signal.logmean + spec.signal.logsd * standard_normal(rng));
    out.samples.push_back(std::move(h));
  }
  return out;
}

}  // namespace hipe
