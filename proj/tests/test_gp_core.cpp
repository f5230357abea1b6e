#include "hipe/gp_core.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace hipe;
using namespace hipe::testing;

namespace {

HyperSample unit_hyper(Index dim) {
  HyperSample h;
  h.lengthscales = Vector::Ones(dim);
  h.noise_var = 1e-2;
  return h;
}

}  // namespace

TEST_CASE("matern kernel matches the closed-form profile") {
  HyperSample h = unit_hyper(1);
  Matrix a(1, 1), b(1, 1);
  a << 0.0;
  b << 1.0;
  CHECK(kernel_matrix(a, a, h)(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  // (1 + sqrt5 + 5/3) exp(-sqrt5)
  CHECK(kernel_matrix(a, b, h)(0, 0) == doctest::Approx(0.5239941088318203).epsilon(1e-14));
  CHECK(kernel_matrix(a, b, h, KernelFamily::kRbf)(0, 0) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
}

TEST_CASE("kernel matrix is symmetric with signal variance on the diagonal") {
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const Index dim = 1 + rep % 5;
    HyperSample h = random_hyper(dim, rng);
    const Matrix x = uniform_matrix(7, dim, rng);
    const Matrix k = kernel_matrix(x, x, h);
    CHECK((k - k.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((k.diagonal().array() - h.signal_var).abs().maxCoeff() < 1e-15);
    CHECK((k - kernel_ref(x, x, h)).cwiseAbs().maxCoeff() < 1e-14);
    const Matrix kr = kernel_matrix(x, x, h, KernelFamily::kRbf);
    CHECK((kr - kernel_ref(x, x, h, true)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("kernel parse and print round trip") {
  CHECK(parse_kernel_family("matern52") == KernelFamily::kMatern52);
  CHECK(parse_kernel_family(to_string(KernelFamily::kRbf)) == KernelFamily::kRbf);
  CHECK_THROWS_AS(parse_kernel_family("matern32"), std::invalid_argument);
}

TEST_CASE("hyper sample and dataset validation") {
  HyperSample h = unit_hyper(2);
  CHECK_NOTHROW(h.validate());
  h.lengthscales(1) = -1.0;
  CHECK_THROWS_AS(h.validate(), std::invalid_argument);
  h = unit_hyper(2);
  h.noise_var = 0.0;
  CHECK(h.effective_noise_var() == kNoiseVarFloor);

  Dataset d = Dataset::empty(2);
  CHECK(d.is_empty());
  Matrix x(1, 2);
  x << 0.2, 1.3;
  d.append(x, Vector::Ones(1));
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
  CHECK_THROWS_AS(d.append(Matrix::Zero(2, 2), Vector::Ones(1)), std::invalid_argument);
}

TEST_CASE("posterior matches a dense direct solve") {
  Rng rng(11);
  for (int rep = 0; rep < 40; ++rep) {
    const Index dim = 1 + rep % 6;
    const Index n = 1 + rep % 20;
    HyperSample h = random_hyper(dim, rng);
    const Matrix x = uniform_matrix(n, dim, rng);
    const Vector y = normal_matrix(n, 1, rng);
    const Matrix q = uniform_matrix(5, dim, rng);
    const Dataset data{x, y};
    for (bool noisy : {false, true}) {
      const PosteriorGaussian got = posterior(data, h, q, noisy);
      const PosteriorGaussian want = posterior_ref(x, y, h, q, noisy);
      CHECK((got.mean - want.mean).cwiseAbs().maxCoeff() < 1e-8);
      CHECK((got.covariance - want.covariance).cwiseAbs().maxCoeff() < 1e-8);
    }
    const ConditionedGp gp(data, h);
    const PosteriorGaussian p = gp.predict(q, false);
    CHECK((gp.mean(q) - p.mean).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((gp.variance(q, false) - p.covariance.diagonal().cwiseMax(0.0)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("empty data gives the prior") {
  HyperSample h = unit_hyper(3);
  h.mean_const = 0.4;
  Rng rng(2);
  const Matrix q = uniform_matrix(4, 3, rng);
  const PosteriorGaussian p = posterior(Dataset::empty(3), h, q, false);
  CHECK((p.mean.array() - 0.4).abs().maxCoeff() == 0.0);
  CHECK((p.covariance - kernel_ref(q, q, h)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("log marginal likelihood") {
  SUBCASE("single observation at the mean with unit total variance") {
    HyperSample h = unit_hyper(1);
    h.signal_var = 0.9;
    h.noise_var = 0.1;
    h.mean_const = 0.3;
    Matrix x(1, 1);
    x << 0.5;
    Vector y(1);
    y << 0.3;
    CHECK(log_marginal_likelihood({x, y}, h) == doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
  }
  SUBCASE("random instances against explicit determinant and inverse") {
    Rng rng(5);
    for (int rep = 0; rep < 30; ++rep) {
      const Index dim = 1 + rep % 4;
      const Index n = 2 + rep % 12;
      HyperSample h = random_hyper(dim, rng);
      const Matrix x = uniform_matrix(n, dim, rng);
      const Vector y = normal_matrix(n, 1, rng);
      CHECK(std::abs(log_marginal_likelihood({x, y}, h) - log_marginal_ref(x, y, h)) < 1e-8);
    }
  }
  CHECK_THROWS_AS(log_marginal_likelihood(Dataset::empty(2), unit_hyper(2)), std::invalid_argument);
}

TEST_CASE("jittered cholesky escalates then gives up") {
  Matrix rank_one = Vector::Ones(4) * Vector::Ones(4).transpose();
  const JitteredCholesky c = jittered_cholesky(rank_one, 1.0);
  CHECK(c.jitter > 0.0);
  CHECK(c.jitter <= kJitterRelativeMax * (1.0 + 1e-9));
  Matrix recon = c.lower * c.lower.transpose();
  CHECK((recon - rank_one - c.jitter * Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);

  Matrix indefinite = Matrix::Identity(3, 3);
  indefinite(2, 2) = -1.0;
  CHECK_THROWS_AS(jittered_cholesky(indefinite, 1.0), NumericalError);

  Matrix spd = Matrix::Identity(2, 2) * 2.0;
  CHECK(jittered_cholesky(spd, 1.0, true).jitter == 0.0);
}

TEST_CASE("cholesky adjoint matches finite differences") {
  Rng rng(8);
  for (int rep = 0; rep < 10; ++rep) {
    const Index n = 2 + rep % 5;
    const Matrix r = normal_matrix(n, n, rng);
    const Matrix a = r * r.transpose() + static_cast<double>(n) * Matrix::Identity(n, n);
    const Matrix w = normal_matrix(n, n, rng);
    auto f = [&](const Matrix& m) {
      const Matrix sym = 0.5 * (m + m.transpose());
      Eigen::LLT<Matrix> llt(sym);
      const Matrix l = llt.matrixL();
      return (w.array() * l.array()).sum();
    };
    const JitteredCholesky c = jittered_cholesky(a, 1.0, true);
    const Matrix lower_bar = w.triangularView<Eigen::Lower>();
    const Matrix got = cholesky_backward(c.lower, lower_bar);
    const Matrix want = fd_gradient(f, a);
    // fd_gradient perturbs single entries of a symmetric matrix; symmetrizing
    // inside f splits each perturbation evenly, matching the symmetric adjoint.
    CHECK(max_rel_error(got, want) < 1e-6);
  }
}

TEST_CASE("kernel gradient matches finite differences") {
  Rng rng(9);
  for (KernelFamily kf : {KernelFamily::kMatern52, KernelFamily::kRbf}) {
    const Index dim = 3;
    HyperSample h = random_hyper(dim, rng);
    const Matrix a = uniform_matrix(4, dim, rng);
    const Matrix b = uniform_matrix(5, dim, rng);
    const Matrix w = normal_matrix(4, 5, rng);
    Matrix got = Matrix::Zero(4, dim);
    accumulate_kernel_gradient(a, b, w, h, kf, got);
    const Matrix want =
        fd_gradient([&](const Matrix& x) { return (w.array() * kernel_matrix(x, b, h, kf).array()).sum(); }, a);
    CHECK(max_rel_error(got, want) < 1e-6);
  }
}

TEST_CASE("batch posterior adjoint matches finite differences") {
  Rng rng(10);
  for (int rep = 0; rep < 6; ++rep) {
    const Index dim = 1 + rep % 3;
    const Index n = rep;  // includes the empty dataset
    HyperSample h = random_hyper(dim, rng);
    const Dataset data{uniform_matrix(n, dim, rng), normal_matrix(n, 1, rng)};
    const ConditionedGp gp(data, h);
    const Matrix batch = uniform_matrix(3, dim, rng);
    const Vector wm = normal_matrix(3, 1, rng);
    const Matrix wc = normal_matrix(3, 3, rng);
    auto f = [&](const Matrix& x) {
      const BatchPosterior p = gp.batch_posterior(x, true);
      return wm.dot(p.mean) + (wc.array() * p.covariance.array()).sum();
    };
    const BatchPosterior post = gp.batch_posterior(batch, true);
    Matrix got = Matrix::Zero(3, dim);
    gp.batch_posterior_backward(batch, post, wm, wc, Matrix(), got);
    CHECK(max_rel_error(got, fd_gradient(f, batch)) < 1e-6);
  }
}

TEST_CASE("fantasy variance equals refitting on the augmented inputs") {
  Rng rng(12);
  for (int rep = 0; rep < 10; ++rep) {
    const Index dim = 2;
    HyperSample h = random_hyper(dim, rng);
    const Index n = rep % 4;
    Dataset data{uniform_matrix(n, dim, rng), normal_matrix(n, 1, rng)};
    const Matrix batch = uniform_matrix(2, dim, rng);
    const Matrix test = uniform_matrix(6, dim, rng);
    const Vector got = fantasy_variance(data, h, batch, test);
    Dataset augmented = data;
    augmented.append(batch, normal_matrix(2, 1, rng));  // outcomes are irrelevant
    const Vector want = posterior(augmented, h, test, false).covariance.diagonal();
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("gaussian entropy") {
  Matrix one(1, 1);
  one << 1.0;
  CHECK(gaussian_entropy(one) == doctest::Approx(0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e)).epsilon(1e-14));
  Matrix c(2, 2);
  c << 1.0, 0.5, 0.5, 1.0;
  const double want = 0.5 * std::log(std::pow(2.0 * std::numbers::pi * std::numbers::e, 2) * 0.75);
  CHECK(gaussian_entropy(c) == doctest::Approx(want).epsilon(1e-13));

  Rng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const Index a = 1 + rep % 3;
    const Index b = 1 + rep % 4;
    const Matrix ra = normal_matrix(a, a, rng);
    const Matrix rb = normal_matrix(b, b, rng);
    const Matrix sa = ra * ra.transpose() + 0.1 * Matrix::Identity(a, a);
    const Matrix sb = rb * rb.transpose() + 0.1 * Matrix::Identity(b, b);
    Matrix block = Matrix::Zero(a + b, a + b);
    block.topLeftCorner(a, a) = sa;
    block.bottomRightCorner(b, b) = sb;
    CHECK(std::abs(gaussian_entropy(block) - gaussian_entropy(sa) - gaussian_entropy(sb)) < 1e-12);
  }
}

TEST_CASE("standardizer") {
  Vector y(4);
  y << 1.0, 2.0, 3.0, 6.0;
  const Standardizer s = Standardizer::fit(y);
  const Vector z = s.apply(y);
  CHECK(std::abs(z.mean()) < 1e-15);
  CHECK((z.array() - z.mean()).square().sum() / 3.0 == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(s.restore_mean(z(3)) == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(s.restore_variance(1.0) == doctest::Approx(s.scale * s.scale));

  const Standardizer single = Standardizer::fit(Vector::Constant(1, 5.0));
  CHECK(single.offset == 0.0);
  CHECK(single.scale == 1.0);
  const Standardizer flat = Standardizer::fit(Vector::Constant(3, 2.0));
  CHECK(flat.scale == 1.0);
}
