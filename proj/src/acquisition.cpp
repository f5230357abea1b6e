#include "hipe/acquisition.hpp"

#include "hipe/random.hpp"
#include "hipe/sobol.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace hipe {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);
const double kLog2PiE = kLog2Pi + 1.0;

struct TermWeights {
  double epig = 0.0;
  double nipv = 0.0;
  double bald = 0.0;
};

void check_batch(const AcqContext& ctx, const Matrix& batch) {
  if (batch.rows() < 1) throw std::invalid_argument("acquisition: batch must have at least one row");
  if (batch.cols() != ctx.dim()) throw std::invalid_argument("acquisition: batch dimension mismatch");
  if (batch.rows() > ctx.max_q()) {
    throw std::invalid_argument("acquisition: batch has " + std::to_string(batch.rows()) +
                                " rows but the context holds base draws for at most " + std::to_string(ctx.max_q()));
  }
  if (!batch.allFinite()) throw std::invalid_argument("acquisition: batch has non-finite coordinates");
}

// Value (and gradient) of w.epig * EPIG + w.nipv * NIPV + w.bald * BALD in one
// pass over the ensemble. Per-model batch posteriors are shared by all terms.
double evaluate_terms(const AcqContext& ctx, const Matrix& batch, const TermWeights& w, Matrix* grad) {
  check_batch(ctx, batch);
  const Index num_models = ctx.num_models();
  const Index q = batch.rows();
  const Index num_test = ctx.test_points().rows();
  const double inv_mt = 1.0 / static_cast<double>(num_models * num_test);
  const bool need_test = w.epig != 0.0 || w.nipv != 0.0;
  const bool need_bald = w.bald != 0.0 && num_models > 1;
  const bool noisy = ctx.options().noisy_entropies;
  const KernelFamily kernel = ctx.ensemble().kernel;

  std::vector<BatchPosterior> posts(static_cast<std::size_t>(num_models));
  std::vector<JitteredCholesky> chols(static_cast<std::size_t>(num_models));
  std::vector<Vector> mean_bar(static_cast<std::size_t>(num_models));
  std::vector<Matrix> cov_bar(static_cast<std::size_t>(num_models));
  std::vector<Matrix> cross_bar(static_cast<std::size_t>(num_models));
  if (grad) grad->setZero(q, batch.cols());

  double value = 0.0;
  for (Index m = 0; m < num_models; ++m) {
    const auto mi = static_cast<std::size_t>(m);
    const ConditionedGp& gp = ctx.model(m);
    const HyperSample& h = gp.hyper();
    posts[mi] = gp.batch_posterior(batch, /*include_noise=*/true);
    chols[mi] = jittered_cholesky(posts[mi].covariance, h.signal_var, /*start_without_jitter=*/true);
    if (grad) {
      mean_bar[mi] = Vector::Zero(q);
      cov_bar[mi] = Matrix::Zero(q, q);
    }
    if (!need_test) continue;

    // Cross-covariance between batch and test points given the data, and the
    // variance reduction it implies after conditioning on the noisy batch.
    Matrix cross = kernel_matrix(batch, ctx.test_points(), h, kernel);
    if (gp.num_train() > 0) cross.noalias() -= posts[mi].cross * ctx.train_solve_test(m);
    const Matrix solved = chols[mi].solve(cross);
    const Vector reduction = (cross.array() * solved.array()).colwise().sum().transpose();
    const Vector latent = ctx.test_variance(m) - reduction;
    const double noise = h.effective_noise_var();
    const double latent_floor = kJitterRelative * h.signal_var;

    Vector var_bar = Vector::Zero(num_test);
    for (Index t = 0; t < num_test; ++t) {
      if (w.epig != 0.0) {
        const double var = noisy ? std::max(latent(t), 0.0) + noise : std::max(latent(t), latent_floor);
        value -= w.epig * 0.5 * inv_mt * (kLog2PiE + std::log(var));
        var_bar(t) -= w.epig * 0.5 * inv_mt / var;
      }
      if (w.nipv != 0.0) {
        value -= w.nipv * inv_mt * latent(t);
        var_bar(t) -= w.nipv * inv_mt;
      }
    }
    if (grad) {
      // latent_t = v_t - s_t^T C^-1 s_t
      const Matrix cross_adj = -2.0 * solved * var_bar.asDiagonal();
      cov_bar[mi].noalias() += solved * var_bar.asDiagonal() * solved.transpose();
      accumulate_kernel_gradient(batch, ctx.test_points(), cross_adj, h, kernel, *grad);
      if (gp.num_train() > 0) cross_bar[mi] = -cross_adj * ctx.train_solve_test(m).transpose();
    }
  }

  if (need_bald) {
    const Index num_draws = ctx.base_draws().rows();
    const Matrix z = ctx.base_draws().leftCols(q).transpose();  // q x N
    std::vector<Index> counts(static_cast<std::size_t>(num_models), 0);
    for (Index n = 0; n < num_draws; ++n) ++counts[static_cast<std::size_t>(n % num_models)];

    // Joint draws from the equal-weight mixture, component n mod M for draw n.
    Matrix y(q, num_draws);
    for (Index n = 0; n < num_draws; ++n) {
      const auto c = static_cast<std::size_t>(n % num_models);
      y.col(n) = posts[c].mean + chols[c].lower.triangularView<Eigen::Lower>() * z.col(n);
    }
    Matrix loglik(num_draws, num_models);
    std::vector<Matrix> whitened_solve(grad ? static_cast<std::size_t>(num_models) : 0);
    for (Index m = 0; m < num_models; ++m) {
      const auto mi = static_cast<std::size_t>(m);
      Matrix resid = y.colwise() - posts[mi].mean;
      chols[mi].lower.triangularView<Eigen::Lower>().solveInPlace(resid);
      loglik.col(m) = (-0.5 * resid.colwise().squaredNorm()).transpose().array() -
                      0.5 * chols[mi].log_det() - 0.5 * static_cast<double>(q) * kLog2Pi;
      if (grad) {
        chols[mi].lower.triangularView<Eigen::Lower>().transpose().solveInPlace(resid);
        whitened_solve[mi] = std::move(resid);  // C_m^-1 (Y - mu_m)
      }
    }

    const double log_m = std::log(static_cast<double>(num_models));
    const BaldConditional mode = ctx.options().bald_conditional;
    Matrix adj = Matrix::Zero(num_draws, num_models);  // d BALD / d loglik
    double h_mix = 0.0;
    double h_cond_mc = 0.0;
    double label_info = 0.0;
    for (Index n = 0; n < num_draws; ++n) {
      const Index c = n % num_models;
      const double weight = 1.0 / static_cast<double>(num_models * counts[static_cast<std::size_t>(c)]);
      const double top = loglik.row(n).maxCoeff();
      const double lse = top + std::log((loglik.row(n).array() - top).exp().sum());
      const Eigen::RowVectorXd log_resp = loglik.row(n).array() - lse;
      const Eigen::RowVectorXd resp = log_resp.array().exp();
      if (mode == BaldConditional::kLabelEntropy) {
        // log M - H[theta | Y_n], in [0, log M]
        const double neg_entropy = (resp.array() * log_resp.array()).sum();
        label_info += weight * (log_m + neg_entropy);
        if (grad) adj.row(n) = weight * (resp.array() * (log_resp.array() - neg_entropy));
        continue;
      }
      h_mix -= weight * (lse - log_m);
      h_cond_mc -= weight * loglik(n, c);
      if (grad) {
        adj.row(n) = -weight * resp;
        if (mode == BaldConditional::kMonteCarlo) adj(n, c) += weight;
      }
    }
    double h_cond = h_cond_mc;
    if (mode == BaldConditional::kClosedForm) {
      h_cond = 0.0;
      for (const auto& ch : chols) h_cond += 0.5 * (static_cast<double>(q) * kLog2PiE + ch.log_det());
      h_cond /= static_cast<double>(num_models);
    }
    if (mode == BaldConditional::kLabelEntropy) {
      h_mix = label_info;
      h_cond = 0.0;
    }
    value += w.bald * (h_mix - h_cond);

    if (grad) {
      adj *= w.bald;
      Matrix y_bar = Matrix::Zero(q, num_draws);
      for (Index m = 0; m < num_models; ++m) {
        const auto mi = static_cast<std::size_t>(m);
        const Matrix& ws = whitened_solve[mi];
        const Vector a = adj.col(m);
        const Matrix weighted = ws * a.asDiagonal();
        const Matrix cov_inv = chols[mi].inverse();
        mean_bar[mi].noalias() += ws * a;
        cov_bar[mi].noalias() += 0.5 * weighted * ws.transpose();
        cov_bar[mi] -= 0.5 * a.sum() * cov_inv;
        y_bar -= weighted;
        if (mode == BaldConditional::kClosedForm) {
          cov_bar[mi] -= (w.bald * 0.5 / static_cast<double>(num_models)) * cov_inv;
        }
      }
      // Back through Y_n = mu_c + L_c z_n.
      std::vector<Matrix> lower_bar(static_cast<std::size_t>(num_models), Matrix::Zero(q, q));
      for (Index n = 0; n < num_draws; ++n) {
        const auto c = static_cast<std::size_t>(n % num_models);
        mean_bar[c] += y_bar.col(n);
        lower_bar[c].noalias() += y_bar.col(n) * z.col(n).transpose();
      }
      for (Index m = 0; m < num_models; ++m) {
        const auto mi = static_cast<std::size_t>(m);
        cov_bar[mi] += cholesky_backward(chols[mi].lower, lower_bar[mi]);
      }
    }
  }

  if (grad) {
    for (Index m = 0; m < num_models; ++m) {
      const auto mi = static_cast<std::size_t>(m);
      ctx.model(m).batch_posterior_backward(batch, posts[mi], mean_bar[mi], cov_bar[mi], cross_bar[mi], *grad);
    }
  }
  return value;
}

}  // namespace

AcqKind parse_acq_kind(const std::string& name) {
  if (name == "bald") return AcqKind::kBald;
  if (name == "epig") return AcqKind::kEpig;
  if (name == "nipv") return AcqKind::kNipv;
  if (name == "hipe") return AcqKind::kHipe;
  throw std::invalid_argument("unknown acquisition '" + name + "'");
}

std::string to_string(AcqKind kind) {
  switch (kind) {
    case AcqKind::kBald: return "bald";
    case AcqKind::kEpig: return "epig";
    case AcqKind::kNipv: return "nipv";
    case AcqKind::kHipe: return "hipe";
  }
  return "unknown";
}

AcqContext::AcqContext(HyperEnsemble ensemble, Dataset data, Matrix test_points, Matrix base_draws,
                       AcqOptions options)
    : ensemble_(std::move(ensemble)),
      data_(std::move(data)),
      test_points_(std::move(test_points)),
      base_draws_(std::move(base_draws)),
      options_(options) {
  ensemble_.validate();
  data_.validate();
  const Index dim = ensemble_.dim();
  if (test_points_.rows() < 1 || test_points_.cols() != dim) {
    throw std::invalid_argument("AcqContext: need at least one test point of the ensemble's dimension");
  }
  if (test_points_.minCoeff() < 0.0 || test_points_.maxCoeff() > 1.0) {
    throw std::invalid_argument("AcqContext: test points must lie in the unit cube");
  }
  if (data_.size() > 0 && data_.dim() != dim) {
    throw std::invalid_argument("AcqContext: data dimension differs from the ensemble's");
  }
  if (data_.size() == 0) data_ = Dataset::empty(dim);
  if (base_draws_.rows() < 1 || base_draws_.cols() < 1) {
    throw std::invalid_argument("AcqContext: base draws must be non-empty");
  }
  if (ensemble_.size() > 1 && base_draws_.rows() < ensemble_.size()) {
    throw std::invalid_argument("AcqContext: need at least as many mixture draws as hyperparameter samples");
  }
  if (options_.beta && !(*options_.beta >= 0.0)) {
    throw std::invalid_argument("AcqContext: beta must be non-negative");
  }
  for (const HyperSample& h : ensemble_.samples) {
    models_.emplace_back(data_, h, ensemble_.kernel);
    const ConditionedGp& gp = models_.back();
    if (gp.num_train() > 0) {
      train_solve_test_.push_back(gp.solve(kernel_matrix(data_.points, test_points_, h, ensemble_.kernel)));
    } else {
      train_solve_test_.emplace_back(0, test_points_.rows());
    }
    test_variance_.push_back(gp.variance(test_points_, false));
    test_mean_.push_back(gp.mean(test_points_));
  }
  beta_ = options_.beta ? *options_.beta : estimate_beta(*this);
}

AcqContext AcqContext::with_random_draws(HyperEnsemble ensemble, Dataset data, Index num_test, Index num_draws,
                                         Index max_q, std::uint64_t seed, AcqOptions options) {
  const Index dim = ensemble.dim();
  Rng test_rng(derive_seed(seed, 1));
  Matrix test = uniform_matrix(num_test, dim, test_rng);
  Matrix draws = sobol_normal_draws(num_draws, max_q, derive_seed(seed, 2));
  return AcqContext(std::move(ensemble), std::move(data), std::move(test), std::move(draws), options);
}

double bald(const AcqContext& ctx, const Matrix& batch, Matrix* grad) {
  return evaluate_terms(ctx, batch, TermWeights{0.0, 0.0, 1.0}, grad);
}

double epig(const AcqContext& ctx, const Matrix& batch, Matrix* grad) {
  return evaluate_terms(ctx, batch, TermWeights{1.0, 0.0, 0.0}, grad);
}

double nipv(const AcqContext& ctx, const Matrix& batch, Matrix* grad) {
  return evaluate_terms(ctx, batch, TermWeights{0.0, 1.0, 0.0}, grad);
}

double hipe(const AcqContext& ctx, const Matrix& batch, Matrix* grad) {
  return hipe_weighted(ctx, batch, ctx.beta(), grad);
}

double hipe_weighted(const AcqContext& ctx, const Matrix& batch, double beta, Matrix* grad) {
  return evaluate_terms(ctx, batch, TermWeights{1.0, 0.0, beta}, grad);
}

double mixture_entropy_1d(const Vector& means, const Vector& variances, double tolerance) {
  const Index m = means.size();
  if (m < 1 || variances.size() != m) {
    throw std::invalid_argument("mixture_entropy_1d: need matching, non-empty means and variances");
  }
  const Vector sd = variances.array().sqrt();
  if (!(sd.minCoeff() > 0.0) || !sd.allFinite() || !means.allFinite()) {
    throw std::invalid_argument("mixture_entropy_1d: variances must be positive and finite");
  }
  const double log_m = std::log(static_cast<double>(m));
  const Vector log_norm = -(sd.array().log() + 0.5 * kLog2Pi);
  auto integrand = [&](double y) {
    double top = -std::numeric_limits<double>::infinity();
    for (Index k = 0; k < m; ++k) {
      const double z = (y - means(k)) / sd(k);
      top = std::max(top, log_norm(k) - 0.5 * z * z);
    }
    double acc = 0.0;
    for (Index k = 0; k < m; ++k) {
      const double z = (y - means(k)) / sd(k);
      acc += std::exp(log_norm(k) - 0.5 * z * z - top);
    }
    const double log_p = top + std::log(acc) - log_m;
    return log_p < -700.0 ? 0.0 : -std::exp(log_p) * log_p;
  };
  // Breakpoints bracket every component, so narrow components are never
  // stepped over by the quadrature nodes.
  constexpr double kHalfWidth = 10.0;
  std::vector<double> cuts;
  for (Index k = 0; k < m; ++k) {
    cuts.push_back(means(k) - kHalfWidth * sd(k));
    cuts.push_back(means(k));
    cuts.push_back(means(k) + kHalfWidth * sd(k));
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double total = 0.0;
  double total_error = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double err = 0.0;
    total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, cuts[i], cuts[i + 1], 10,
                                                                           1e-9, &err);
    total_error += err;
  }
  if (!std::isfinite(total) || total_error > tolerance) {
    throw NumericalError("mixture_entropy_1d: quadrature error estimate " + std::to_string(total_error) +
                         " exceeds tolerance");
  }
  return total;
}

double estimate_beta(const AcqContext& ctx) {
  const Index num_models = ctx.num_models();
  if (num_models <= 1) return 0.0;
  const Index num_test = ctx.test_points().rows();
  Vector means(num_models);
  Vector vars(num_models);
  double total = 0.0;
  for (Index t = 0; t < num_test; ++t) {
    double cond = 0.0;
    for (Index m = 0; m < num_models; ++m) {
      const HyperSample& h = ctx.model(m).hyper();
      means(m) = ctx.test_mean(m)(t);
      vars(m) = ctx.options().noisy_beta ? ctx.test_variance(m)(t) + h.effective_noise_var()
                                          : std::max(ctx.test_variance(m)(t), kJitterRelative * h.signal_var);
      cond += 0.5 * (kLog2PiE + std::log(vars(m)));
    }
    total += mixture_entropy_1d(means, vars, ctx.options().beta_tolerance) - cond / static_cast<double>(num_models);
  }
  return std::max(0.0, total / static_cast<double>(num_test));
}

double evaluate_acquisition(AcqKind kind, const AcqContext& ctx, const Matrix& batch, Matrix* grad) {
  switch (kind) {
    case AcqKind::kBald: return bald(ctx, batch, grad);
    case AcqKind::kEpig: return epig(ctx, batch, grad);
    case AcqKind::kNipv: return nipv(ctx, batch, grad);
    case AcqKind::kHipe: return hipe(ctx, batch, grad);
  }
  throw std::invalid_argument("evaluate_acquisition: unknown kind");
}

Objective make_acquisition(AcqKind kind, std::shared_ptr<const AcqContext> ctx) {
  return [kind, ctx = std::move(ctx)](const Matrix& batch, Matrix* grad) {
    return evaluate_acquisition(kind, *ctx, batch, grad);
  };
}

}  // namespace hipe
