#include "hipe/bo_utility.hpp"

#include "hipe/random.hpp"

#include <cmath>
#include <stdexcept>

namespace hipe {

namespace {

// Relative nugget used when conditioning on sampled latent values.
constexpr double kLatentNugget = 1e-6;

double log_softplus(double x) {
  if (x < -30.0) return x;
  const double sp = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  return std::log(sp);
}

// d log softplus(x) / dx
double log_softplus_slope(double x) {
  if (x < -30.0) return 1.0;
  const double sp = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  const double sig = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  return sig / sp;
}

// tau * logsumexp(v / tau) and the softmax weights.
double smooth_max(const Vector& v, double tau, Vector* weights) {
  const double top = v.maxCoeff();
  const Vector e = ((v.array() - top) / tau).exp();
  const double total = e.sum();
  if (weights) *weights = e / total;
  return top + tau * std::log(total);
}

}  // namespace

NeiContext::NeiContext(const HyperEnsemble& ensemble, const Dataset& data, Index max_q, std::uint64_t seed,
                       NeiOptions options)
    : dim_(data.dim()), options_(options) {
  ensemble.validate();
  data.validate();
  if (data.is_empty()) throw std::invalid_argument("noisy EI needs at least one observation");
  if (ensemble.dim() != data.dim()) throw std::invalid_argument("noisy EI: ensemble/data dimension mismatch");
  if (!(options.tau > 0.0) || options.num_samples < 1 || max_q < 1) {
    throw std::invalid_argument("noisy EI: tau, sample count and max_q must be positive");
  }
  const Index n = data.size();
  const Index s_count = options.num_samples;
  Rng rng(derive_seed(seed, 11));
  Vector mean_sum = Vector::Zero(n);
  for (const HyperSample& h : ensemble.samples) {
    const ConditionedGp noisy_gp(data, h, ensemble.kernel);
    const PosteriorGaussian at_data = noisy_gp.predict(data.points, /*include_noise=*/false);
    mean_sum += at_data.mean;
    const JitteredCholesky chol = jittered_cholesky(at_data.covariance, h.signal_var);
    const Matrix z = normal_matrix(n, s_count, rng);
    const Matrix latent = (chol.lower.triangularView<Eigen::Lower>() * z).colwise() + at_data.mean;

    HyperSample nugget = h;
    nugget.noise_var = kLatentNugget * h.signal_var;
    Dataset anchor{data.points, Vector::Constant(n, h.mean_const)};
    ConditionedGp latent_gp(anchor, nugget, ensemble.kernel);
    Matrix solved = latent_gp.solve(latent.array() - h.mean_const);

    Vector inc(s_count);
    for (Index s = 0; s < s_count; ++s) inc(s) = smooth_max(latent.col(s), options.tau, nullptr);
    members_.push_back(Member{std::move(latent_gp), std::move(solved), std::move(inc), normal_matrix(s_count, max_q, rng)});
  }
  Index best = 0;
  mean_sum.maxCoeff(&best);
  incumbent_ = data.points.row(best).transpose();
}

double NeiContext::value(const Matrix& batch, Matrix* grad) const {
  if (batch.cols() != dim_) throw std::invalid_argument("noisy EI: batch dimension mismatch");
  const Index q = batch.rows();
  if (q < 1 || q > members_.front().batch_draws.cols()) throw std::invalid_argument("noisy EI: batch size out of range");
  const double tau = options_.tau;
  const double m_count = static_cast<double>(members_.size());
  const Index s_count = options_.num_samples;
  if (grad) grad->setZero(q, dim_);

  double total = 0.0;
  for (const Member& mem : members_) {
    const ConditionedGp& gp = mem.latent_gp;
    const BatchPosterior post = gp.batch_posterior(batch, /*include_noise=*/false);
    const JitteredCholesky chol = jittered_cholesky(post.covariance, gp.hyper().signal_var);
    const Matrix eps = mem.batch_draws.leftCols(q);  // S x q
    Matrix f = post.cross * mem.solved;
    f.array() += gp.hyper().mean_const;
    f.noalias() += chol.lower.triangularView<Eigen::Lower>() * eps.transpose();

    Vector log_imp(s_count);
    Vector x(s_count);
    std::vector<Vector> soft(grad ? static_cast<std::size_t>(s_count) : 0);
    for (Index s = 0; s < s_count; ++s) {
      const double smax = smooth_max(f.col(s), tau, grad ? &soft[static_cast<std::size_t>(s)] : nullptr);
      x(s) = (smax - mem.incumbent_smax(s)) / tau;
      log_imp(s) = std::log(tau) + log_softplus(x(s));
    }
    const double top = log_imp.maxCoeff();
    const Vector w = (log_imp.array() - top).exp();
    const double wsum = w.sum();
    total += top + std::log(wsum) - std::log(static_cast<double>(s_count));

    if (grad) {
      Matrix f_bar(q, s_count);
      for (Index s = 0; s < s_count; ++s) {
        const double coef = w(s) / wsum * log_softplus_slope(x(s)) / (tau * m_count);
        f_bar.col(s) = coef * soft[static_cast<std::size_t>(s)];
      }
      const Matrix cross_bar = f_bar * mem.solved.transpose();
      const Matrix lower_bar = f_bar * eps;
      const Matrix cov_bar = cholesky_backward(chol.lower, lower_bar);
      gp.batch_posterior_backward(batch, post, Vector(), cov_bar, cross_bar, *grad);
    }
  }
  return total / m_count;
}

Objective make_nei_objective(std::shared_ptr<const NeiContext> ctx) {
  return [ctx](const Matrix& batch, Matrix* grad) { return ctx->value(batch, grad); };
}

std::vector<Matrix> incumbent_perturbations(const Vector& incumbent, int q, int count, double sd,
                                            std::uint64_t seed) {
  if (q < 1 || count < 0 || !(sd >= 0.0)) throw std::invalid_argument("incumbent_perturbations: bad arguments");
  Rng rng(seed);
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int c = 0; c < count; ++c) {
    Matrix b = (sd * normal_matrix(q, incumbent.size(), rng)).rowwise() + incumbent.transpose();
    out.push_back(b.cwiseMax(0.0).cwiseMin(1.0));
  }
  return out;
}

}  // namespace hipe
