// Brute-force reference for the expected joint information gain about test
// outcomes and hyperparameters. Deliberately shares no code with the
// acquisition estimators beyond the GP primitives: conditioning is done by
// refitting on the augmented dataset and the theta posterior by Bayes' rule.
#include "hipe/acquisition.hpp"

#include "hipe/random.hpp"

#include <cmath>
#include <numbers>

namespace hipe {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

double mvn_logpdf(const Vector& y, const PosteriorGaussian& g, const Matrix& lower) {
  const Vector white = lower.triangularView<Eigen::Lower>().solve(y - g.mean);
  return -0.5 * white.squaredNorm() - lower.diagonal().array().log().sum() -
         0.5 * static_cast<double>(y.size()) * kLog2Pi;
}

}  // namespace

OracleEstimate joint_eig_oracle(const AcqContext& ctx, const Matrix& batch, int n_outer, int n_inner,
                                std::uint64_t seed) {
  const Index num_models = ctx.num_models();
  const Index num_test = ctx.test_points().rows();
  if (batch.rows() > 2 || num_models > 4 || num_test > 32) {
    throw std::invalid_argument("joint_eig_oracle: instance too large (needs q <= 2, M <= 4, T <= 32)");
  }
  if (n_outer < 2 || n_inner < 1) {
    throw std::invalid_argument("joint_eig_oracle: need n_outer >= 2 and n_inner >= 1");
  }
  if (batch.rows() == 0) return OracleEstimate{0.0, 0.0};
  if (batch.cols() != ctx.dim()) throw std::invalid_argument("joint_eig_oracle: batch dimension mismatch");

  const bool noisy = ctx.options().noisy_entropies;
  const KernelFamily kernel = ctx.ensemble().kernel;
  const Dataset& data = ctx.data();
  const Matrix& test = ctx.test_points();
  const double log_m = std::log(static_cast<double>(num_models));

  std::vector<PosteriorGaussian> batch_pred;
  std::vector<Matrix> batch_lower;
  std::vector<Vector> test_mean;
  std::vector<Vector> test_sd;
  for (const HyperSample& h : ctx.ensemble().samples) {
    batch_pred.push_back(posterior(data, h, batch, /*include_noise=*/true, kernel));
    batch_lower.push_back(jittered_cholesky(batch_pred.back().covariance, h.signal_var).lower);
    const PosteriorGaussian tp = posterior(data, h, test, noisy, kernel);
    test_mean.push_back(tp.mean);
    test_sd.push_back(tp.covariance.diagonal().cwiseMax(1e-300).cwiseSqrt());
  }

  Rng rng(seed);
  std::vector<double> gains(static_cast<std::size_t>(n_outer));
  Vector log_w(num_models);
  std::vector<Vector> cond_mean(static_cast<std::size_t>(num_models));
  std::vector<Vector> cond_sd(static_cast<std::size_t>(num_models));
  for (int o = 0; o < n_outer; ++o) {
    // Outer: theta uniform over the ensemble, then y(X) from its predictive.
    const auto k0 = static_cast<std::size_t>(o % num_models);
    Vector z(batch.rows());
    for (Index i = 0; i < z.size(); ++i) z(i) = standard_normal(rng);
    const Vector y = batch_pred[k0].mean + batch_lower[k0].triangularView<Eigen::Lower>() * z;

    for (Index k = 0; k < num_models; ++k) {
      const auto ki = static_cast<std::size_t>(k);
      log_w(k) = mvn_logpdf(y, batch_pred[ki], batch_lower[ki]);
    }
    const double top = log_w.maxCoeff();
    log_w.array() -= top + std::log((log_w.array() - top).exp().sum());
    const Vector w = log_w.array().exp();

    Dataset augmented = data;
    augmented.append(batch, y);
    for (Index k = 0; k < num_models; ++k) {
      const auto ki = static_cast<std::size_t>(k);
      const PosteriorGaussian cp = posterior(augmented, ctx.ensemble().samples[ki], test, noisy, kernel);
      cond_mean[ki] = cp.mean;
      cond_sd[ki] = cp.covariance.diagonal().cwiseMax(1e-300).cwiseSqrt();
    }

    // Inner: -E log p(y*, theta) before and after observing y(X), with common
    // random numbers for the two entropies.
    double gain = 0.0;
    for (Index t = 0; t < num_test; ++t) {
      double h_before = 0.0;
      double h_after = 0.0;
      for (int i = 0; i < n_inner; ++i) {
        const double u = uniform01(rng);
        const double e = standard_normal(rng);
        const auto kb = static_cast<std::size_t>(std::min<Index>(num_models - 1, static_cast<Index>(u * num_models)));
        {
          const double ystar = test_mean[kb](t) + test_sd[kb](t) * e;
          const double zz = (ystar - test_mean[kb](t)) / test_sd[kb](t);
          h_before -= -log_m - 0.5 * zz * zz - std::log(test_sd[kb](t)) - 0.5 * kLog2Pi;
        }
        std::size_t ka = 0;
        for (double acc = w(0); ka + 1 < static_cast<std::size_t>(num_models) && u >= acc;) {
          ++ka;
          acc += w(static_cast<Index>(ka));
        }
        {
          const double ystar = cond_mean[ka](t) + cond_sd[ka](t) * e;
          const double zz = (ystar - cond_mean[ka](t)) / cond_sd[ka](t);
          h_after -= log_w(static_cast<Index>(ka)) - 0.5 * zz * zz - std::log(cond_sd[ka](t)) - 0.5 * kLog2Pi;
        }
      }
      gain += (h_before - h_after) / static_cast<double>(n_inner);
    }
    gains[static_cast<std::size_t>(o)] = gain / static_cast<double>(num_test);
  }

  double mean = 0.0;
  for (double g : gains) mean += g;
  mean /= static_cast<double>(n_outer);
  double ss = 0.0;
  for (double g : gains) ss += (g - mean) * (g - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n_outer - 1));
  return OracleEstimate{mean, sd / std::sqrt(static_cast<double>(n_outer))};
}

}  // namespace hipe
