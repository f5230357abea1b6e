#include "hipe/acquisition.hpp"

#include "test_support.hpp"
#include "toy_instances.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace hipe;
using namespace hipe::testing;

namespace {

const double kHalfLog2PiE = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);

/// Entropy of an equal-weight 1-D Gaussian mixture by a fine midpoint rule.
double mixture_entropy_grid(const std::vector<double>& means, const std::vector<double>& vars) {
  double lo = 1e300, hi = -1e300;
  for (std::size_t k = 0; k < means.size(); ++k) {
    lo = std::min(lo, means[k] - 12.0 * std::sqrt(vars[k]));
    hi = std::max(hi, means[k] + 12.0 * std::sqrt(vars[k]));
  }
  const int n = 400000;
  const double dx = (hi - lo) / n;
  double h = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = lo + (i + 0.5) * dx;
    double p = 0.0;
    for (std::size_t k = 0; k < means.size(); ++k) {
      const double z = (x - means[k]) / std::sqrt(vars[k]);
      p += std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi * vars[k]);
    }
    p /= static_cast<double>(means.size());
    if (p > 0.0) h -= p * std::log(p) * dx;
  }
  return h;
}

AcqContext random_context(std::uint64_t seed, Index dim, Index n, Index models, Index max_q, AcqOptions opts = {}) {
  Rng rng(seed);
  std::vector<HyperSample> samples;
  for (Index m = 0; m < models; ++m) samples.push_back(random_hyper(dim, rng));
  Dataset data{uniform_matrix(n, dim, rng), normal_matrix(n, 1, rng)};
  return AcqContext(make_ensemble(samples), data, uniform_matrix(24, dim, rng), normal_matrix(64, max_q, rng), opts);
}

}  // namespace

TEST_CASE("acquisition names") {
  for (const char* n : {"bald", "epig", "nipv", "hipe"}) CHECK(to_string(parse_acq_kind(n)) == n);
  CHECK_THROWS_AS(parse_acq_kind("ucb"), std::invalid_argument);
}

TEST_CASE("context validation") {
  Rng rng(1);
  const HyperEnsemble e = make_ensemble({make_hyper({0.3}, 1e-3), make_hyper({0.5}, 1e-3)});
  const Dataset empty = Dataset::empty(1);
  CHECK_THROWS_AS(AcqContext(e, empty, Matrix(0, 1), normal_matrix(8, 1, rng)), std::invalid_argument);
  CHECK_THROWS_AS(AcqContext(e, empty, Matrix::Constant(2, 1, 1.5), normal_matrix(8, 1, rng)), std::invalid_argument);
  CHECK_THROWS_AS(AcqContext(e, empty, uniform_matrix(4, 1, rng), normal_matrix(1, 1, rng)), std::invalid_argument);
  const AcqContext ctx(e, empty, uniform_matrix(4, 1, rng), normal_matrix(8, 2, rng));
  CHECK_THROWS_AS(bald(ctx, Matrix::Constant(3, 1, 0.5)), std::invalid_argument);
  CHECK_THROWS_AS(epig(ctx, Matrix::Constant(1, 2, 0.5)), std::invalid_argument);
}

TEST_CASE("BALD vanishes for a single hyperparameter sample") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const AcqContext ctx = random_context(seed, 3, 4, 1, 4);
    Rng rng(seed + 100);
    CHECK(std::abs(bald(ctx, uniform_matrix(4, 3, rng))) <= 1e-9);
  }
}

TEST_CASE("BALD matches quadrature for noise disagreement") {
  const HyperEnsemble e = make_ensemble({make_hyper({0.3}, 0.01), make_hyper({0.3}, 1.0)});
  const double h_mix = mixture_entropy_grid({0.0, 0.0}, {1.01, 2.0});
  const double want = h_mix - 0.5 * (0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * 1.01) +
                                     0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * 2.0));
  CHECK(want > 0.0);
  Matrix x(1, 1);
  x << 0.4;
  Matrix dup(2, 1);
  dup << 0.4, 0.4;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const AcqContext ctx = AcqContext::with_random_draws(e, Dataset::empty(1), 8, 4096, 2, seed);
    const double got = bald(ctx, x);
    CHECK(std::abs(got - want) <= 0.05 * want);
    CHECK(bald(ctx, dup) > got);
  }
}

TEST_CASE("BALD estimators agree on average") {
  AcqOptions mc, cf;
  mc.bald_conditional = BaldConditional::kMonteCarlo;
  cf.bald_conditional = BaldConditional::kClosedForm;
  Rng rng(12);
  const HyperEnsemble e = make_ensemble({make_hyper({0.2, 0.4}, 1e-2), make_hyper({0.8, 0.3}, 1e-1)});
  const Dataset data{uniform_matrix(3, 2, rng), normal_matrix(3, 1, rng)};
  const Matrix test = uniform_matrix(16, 2, rng);
  const Matrix draws = normal_matrix(8192, 2, rng);
  const AcqContext labels(e, data, test, draws);
  const AcqContext closed(e, data, test, draws, cf);
  const AcqContext sampled(e, data, test, draws, mc);
  const Matrix x = uniform_matrix(2, 2, rng);
  CHECK(bald(closed, x) == doctest::Approx(bald(labels, x)).epsilon(0.05));
  CHECK(bald(sampled, x) == doctest::Approx(bald(labels, x)).epsilon(0.05));
}

TEST_CASE("BALD is non-negative up to Monte Carlo noise") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const AcqContext ctx = random_context(seed, 2, static_cast<Index>(seed % 5), 3, 3);
    Rng rng(seed + 7);
    CHECK(bald(ctx, uniform_matrix(1 + static_cast<Index>(seed % 3), 2, rng)) >= -1e-6);
  }
}

TEST_CASE("EPIG matches refitting on the augmented data") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const AcqContext ctx = random_context(seed, 2, 1 + static_cast<Index>(seed % 4), 3, 3);
    Rng rng(seed + 50);
    const Matrix batch = uniform_matrix(3, 2, rng);
    double want = 0.0;
    for (const HyperSample& h : ctx.ensemble().samples) {
      const Matrix x = ctx.data().points;
      Matrix xa(x.rows() + 3, 2);
      xa << x, batch;
      const Vector ya = Vector::Zero(xa.rows());
      const PosteriorGaussian p = posterior_ref(xa, ya, h, ctx.test_points(), true);
      for (Index t = 0; t < p.mean.size(); ++t) want -= 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * p.covariance(t, t));
    }
    want /= static_cast<double>(ctx.num_models() * ctx.test_points().rows());
    CHECK(std::abs(epig(ctx, batch) - want) <= 1e-8);
  }
}

TEST_CASE("EPIG limits") {
  SUBCASE("a distant batch leaves the test predictive unchanged") {
    const HyperEnsemble e = make_ensemble({make_hyper({0.01}, 1e-2), make_hyper({0.02}, 1e-3)});
    Rng rng(3);
    Matrix test = 0.3 * uniform_matrix(10, 1, rng);
    Dataset data{Matrix::Constant(1, 1, 0.1), Vector::Ones(1)};
    const AcqContext ctx(e, data, test, normal_matrix(16, 1, rng));
    double baseline = 0.0;
    for (Index m = 0; m < 2; ++m) {
      const HyperSample& h = ctx.ensemble().samples[static_cast<std::size_t>(m)];
      const PosteriorGaussian p = posterior_ref(data.points, data.outcomes, h, test, true);
      for (Index t = 0; t < 10; ++t) baseline -= 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * p.covariance(t, t));
    }
    baseline /= 20.0;
    CHECK(std::abs(epig(ctx, Matrix::Ones(1, 1)) - baseline) <= 1e-9);
  }
  SUBCASE("observing every test point leaves only noise") {
    // Smooth functions observed at every test point: the noisy predictive
    // variance lies between the noise variance and twice it.
    const double noise = 1e-6;
    const HyperEnsemble e = make_ensemble({make_hyper({50.0, 50.0}, noise)});
    Rng rng(5);
    const Matrix test = uniform_matrix(4, 2, rng);
    const AcqContext ctx(e, Dataset::empty(2), test, normal_matrix(4, 4, rng));
    const double v = epig(ctx, test);
    CHECK(v <= -0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * noise) + 1e-9);
    CHECK(v >= -0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * 2.0 * noise) - 1e-9);
  }
}

TEST_CASE("NIPV limits and center preference") {
  SUBCASE("decorrelated batch gives minus the prior variance") {
    const HyperEnsemble e = make_ensemble({make_hyper({0.01}, 1e-3), make_hyper({0.02}, 1e-3)});
    Rng rng(2);
    const AcqContext ctx(e, Dataset::empty(1), 0.3 * uniform_matrix(20, 1, rng), normal_matrix(8, 1, rng));
    CHECK(nipv(ctx, Matrix::Ones(1, 1)) == doctest::Approx(-1.0).epsilon(1e-9));
  }
  SUBCASE("duplicating a point never hurts") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const AcqContext ctx = random_context(seed, 2, 2, 2, 2);
      Rng rng(seed);
      const Matrix x = uniform_matrix(1, 2, rng);
      Matrix dup(2, 2);
      dup << x, x;
      CHECK(nipv(ctx, dup) >= nipv(ctx, x) - 1e-12);
    }
  }
  SUBCASE("1-D grid argmax is the center") {
    const HyperEnsemble e = make_ensemble({make_hyper({0.3}, 1e-3)});
    Matrix grid(101, 1);
    for (Index i = 0; i < 101; ++i) grid(i, 0) = static_cast<double>(i) / 100.0;
    Rng rng(0);
    const AcqContext ctx(e, Dataset::empty(1), grid, normal_matrix(4, 1, rng));
    Index best = 0;
    double best_v = -1e300;
    for (Index i = 0; i < 101; ++i) {
      const double v = nipv(ctx, grid.row(i));
      if (v > best_v) {
        best_v = v;
        best = i;
      }
    }
    CHECK(std::abs(grid(best, 0) - 0.5) <= 0.01 + 1e-12);
  }
}

TEST_CASE("beta quadrature") {
  Vector means(2), vars(2);
  means << -2.0, 2.0;
  vars << 1.0, 1.0;
  const double h = mixture_entropy_1d(means, vars);
  CHECK(std::abs(h - mixture_entropy_grid({-2.0, 2.0}, {1.0, 1.0})) < 1e-6);
  CHECK(std::abs(h - 2.051658726941241) < 1e-6);
  CHECK(std::abs(h - kHalfLog2PiE - 0.6327201937365685) < 1e-6);

  means << 0.0, 0.0;
  CHECK(std::abs(mixture_entropy_1d(means, vars) - kHalfLog2PiE) < 1e-8);

  Vector m3(3), v3(3);
  m3 << -1.0, 0.3, 4.0;
  v3 << 0.05, 2.0, 0.5;
  CHECK(std::abs(mixture_entropy_1d(m3, v3) - mixture_entropy_grid({-1.0, 0.3, 4.0}, {0.05, 2.0, 0.5})) < 1e-6);
}

TEST_CASE("estimated beta") {
  const AcqContext single = random_context(3, 2, 3, 1, 1);
  CHECK(single.beta() == 0.0);
  const HyperEnsemble same = make_ensemble({make_hyper({0.3}, 1e-2), make_hyper({0.3}, 1e-2)});
  Rng rng(1);
  const AcqContext twins(same, Dataset::empty(1), uniform_matrix(8, 1, rng), normal_matrix(8, 1, rng));
  CHECK(std::abs(twins.beta()) < 1e-8);

  // Beta averages the per-test-point information about theta.
  const AcqContext ctx = random_context(9, 2, 4, 3, 1);
  double want = 0.0;
  for (Index t = 0; t < ctx.test_points().rows(); ++t) {
    std::vector<double> mu, var;
    double cond = 0.0;
    for (Index m = 0; m < ctx.num_models(); ++m) {
      const HyperSample& h = ctx.ensemble().samples[static_cast<std::size_t>(m)];
      const PosteriorGaussian p = posterior_ref(ctx.data().points, ctx.data().outcomes, h, ctx.test_points().row(t), true);
      mu.push_back(p.mean(0));
      var.push_back(p.covariance(0, 0));
      cond += 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * p.covariance(0, 0));
    }
    want += mixture_entropy_grid(mu, var) - cond / static_cast<double>(ctx.num_models());
  }
  want = std::max(0.0, want / static_cast<double>(ctx.test_points().rows()));
  CHECK(std::abs(ctx.beta() - want) < 1e-5);
  CHECK(estimate_beta(ctx) == ctx.beta());
}

TEST_CASE("HIPE composition") {
  AcqOptions zero;
  zero.beta = 0.0;
  const AcqContext ctx0 = random_context(4, 3, 5, 3, 2, zero);
  Rng rng(4);
  const Matrix x = uniform_matrix(2, 3, rng);
  CHECK(std::abs(hipe::hipe(ctx0, x) - epig(ctx0, x)) <= 1e-12);

  const AcqContext single = random_context(4, 3, 5, 1, 2);
  CHECK(std::abs(hipe_weighted(single, x, 3.0) - epig(single, x)) <= 1e-9);

  const AcqContext ctx = random_context(4, 3, 5, 3, 2);
  const double e = epig(ctx, x);
  const double b = bald(ctx, x);
  CHECK(hipe::hipe(ctx, x) == doctest::Approx(e + ctx.beta() * b).epsilon(1e-12));
  for (double beta : {0.5, 1.0, 2.0}) CHECK(hipe_weighted(ctx, x, beta) == doctest::Approx(e + beta * b).epsilon(1e-12));
  CHECK(evaluate_acquisition(AcqKind::kHipe, ctx, x) == hipe::hipe(ctx, x));
}

TEST_CASE("SAA determinism and permutation invariance") {
  const AcqContext ctx = random_context(6, 2, 3, 3, 3);
  Rng rng(6);
  const Matrix x = uniform_matrix(3, 2, rng);
  Matrix perm(3, 2);
  perm << x.row(2), x.row(0), x.row(1);
  for (AcqKind k : {AcqKind::kBald, AcqKind::kEpig, AcqKind::kNipv, AcqKind::kHipe}) {
    CHECK(evaluate_acquisition(k, ctx, x) == evaluate_acquisition(k, ctx, x));
  }
  CHECK(epig(ctx, perm) == doctest::Approx(epig(ctx, x)).epsilon(1e-12));
  CHECK(nipv(ctx, perm) == doctest::Approx(nipv(ctx, x)).epsilon(1e-12));
}

TEST_CASE("analytic gradients match finite differences") {
  for (BaldConditional mode : {BaldConditional::kLabelEntropy, BaldConditional::kClosedForm, BaldConditional::kMonteCarlo}) {
    AcqOptions opts;
    opts.bald_conditional = mode;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const AcqContext ctx = random_context(seed + 20, 2, static_cast<Index>(seed), 3, 3, opts);
      Rng rng(seed + 30);
      const Matrix x = 0.1 + 0.8 * uniform_matrix(3, 2, rng).array();
      for (AcqKind k : {AcqKind::kBald, AcqKind::kEpig, AcqKind::kNipv, AcqKind::kHipe}) {
        Matrix grad;
        evaluate_acquisition(k, ctx, x, &grad);
        const Matrix fd = fd_gradient([&](const Matrix& b) { return evaluate_acquisition(k, ctx, b); }, x, 1e-6);
        INFO("kind " << to_string(k) << " seed " << seed << " estimator " << static_cast<int>(mode));
        CHECK(max_rel_error(grad, fd) < 1e-4);
      }
    }
  }
}

TEST_CASE("objective handle") {
  auto ctx = std::make_shared<const AcqContext>(random_context(2, 2, 2, 2, 2));
  const Objective f = make_acquisition(AcqKind::kNipv, ctx);
  Rng rng(2);
  const Matrix x = uniform_matrix(2, 2, rng);
  Matrix g;
  CHECK(f(x, &g) == nipv(*ctx, x));
  CHECK(g.rows() == 2);
}

TEST_CASE("joint information oracle") {
  const JointEigInstance inst = joint_eig_instance(3);
  CHECK(joint_eig_oracle(*inst.ctx, Matrix(0, 1), 10, 4).value == 0.0);
  CHECK_THROWS_AS(joint_eig_oracle(*inst.ctx, Matrix::Constant(3, 1, 0.5), 10, 4), std::invalid_argument);

  SUBCASE("single model reduces to expected predictive information") {
    const HyperEnsemble e = make_ensemble({make_hyper({0.3}, 1e-2)});
    Rng rng(8);
    const Dataset data{uniform_matrix(2, 1, rng), normal_matrix(2, 1, rng)};
    const AcqContext ctx(e, data, uniform_matrix(16, 1, rng), normal_matrix(8, 1, rng));
    const Matrix x = Matrix::Constant(1, 1, 0.6);
    double baseline = 0.0;
    for (Index t = 0; t < 16; ++t) {
      baseline += 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * (ctx.test_variance(0)(t) + 1e-2));
    }
    const double want = epig(ctx, x) + baseline / 16.0;
    const OracleEstimate o = joint_eig_oracle(ctx, x, 400, 64, 5);
    CHECK(std::abs(o.value - want) <= 2.0 * o.std_error + 1e-3);
  }

  SUBCASE("HIPE with unit weight ranks candidates like the oracle") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const JointEigInstance j = joint_eig_instance(seed);
      Vector h(21), o(21);
      for (Index i = 0; i < 21; ++i) {
        h(i) = hipe::hipe(*j.ctx, j.candidates.row(i));
        o(i) = joint_eig_oracle(*j.ctx, j.candidates.row(i), 300, 32, 1234).value;
      }
      CHECK(spearman(h, o) >= 0.9);
    }
  }
}

TEST_CASE("lengthscale disagreement separates BALD from NIPV") {
  const auto ctx = lengthscale_disagreement_context(0);
  const Matrix grid = grid_2d(51);
  Index bb = 0, bn = 0;
  double vb = -1e300, vn = -1e300;
  for (Index i = 0; i < grid.rows(); ++i) {
    const double b = bald(*ctx, grid.row(i));
    const double n = nipv(*ctx, grid.row(i));
    if (b > vb) vb = b, bb = i;
    if (n > vn) vn = n, bn = i;
  }
  const double dx = std::abs(grid(bb, 0) - 0.5);
  const double dy = std::abs(grid(bb, 1) - 0.5);
  CHECK(std::min(dx, dy) <= 0.1);
  CHECK((grid.row(bb) - grid.row(bn)).norm() > 0.1);
}
