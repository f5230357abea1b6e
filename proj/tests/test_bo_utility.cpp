#include "hipe/bo_utility.hpp"

#include "test_support.hpp"
#include "toy_instances.hpp"

#include <doctest.h>

#include <cmath>

using namespace hipe;
using namespace hipe::testing;

namespace {

Dataset bumpy_data() {
  // Observed on the left half only; the best observation is at 0.3.
  Matrix x(5, 1);
  x << 0.05, 0.15, 0.3, 0.4, 0.45;
  Vector y(5);
  y << -1.0, 0.2, 1.0, 0.4, 0.1;
  return {x, y};
}

}  // namespace

TEST_CASE("construction") {
  const HyperEnsemble e = make_ensemble({make_hyper({0.2}, 1e-4)});
  CHECK_THROWS_AS(NeiContext(e, Dataset::empty(1), 2, 0), std::invalid_argument);
  const NeiContext ctx(e, bumpy_data(), 2, 0);
  CHECK(ctx.num_models() == 1);
  CHECK(ctx.dim() == 1);
  CHECK(ctx.incumbent()(0) == 0.3);
  CHECK_THROWS_AS(ctx.value(Matrix::Constant(3, 1, 0.5)), std::invalid_argument);
}

TEST_CASE("improvement sign structure") {
  const HyperEnsemble e = make_ensemble({make_hyper({0.15}, 1e-6), make_hyper({0.25}, 1e-6)});
  const NeiContext ctx(e, bumpy_data(), 1, 3);
  const double at_incumbent = ctx.value(Matrix::Constant(1, 1, 0.3));
  const double unexplored = ctx.value(Matrix::Constant(1, 1, 0.9));
  // exp(utility) is the smoothed expected improvement.
  CHECK(std::exp(at_incumbent) < 1e-2);
  CHECK(std::exp(at_incumbent) > 0.0);
  CHECK(unexplored > at_incumbent);
  CHECK(std::exp(unexplored) > 0.05);
  // A worse observed point offers even less.
  CHECK(ctx.value(Matrix::Constant(1, 1, 0.05)) < at_incumbent);
}

TEST_CASE("larger batches never lower the utility much") {
  const HyperEnsemble e = make_ensemble({make_hyper({0.2}, 1e-4)});
  const NeiContext ctx(e, bumpy_data(), 2, 5);
  Matrix one(1, 1), two(2, 1);
  one << 0.8;
  two << 0.8, 0.6;
  CHECK(ctx.value(two) >= ctx.value(one) - 1e-3);
}

TEST_CASE("gradient matches finite differences") {
  Rng rng(2);
  const HyperEnsemble e = make_ensemble({make_hyper({0.3, 0.5}, 1e-3), make_hyper({0.6, 0.2}, 1e-2, 0.1)});
  const Dataset data{uniform_matrix(6, 2, rng), normal_matrix(6, 1, rng)};
  NeiOptions opts;
  opts.tau = 0.05;  // smooth enough for central differences
  opts.num_samples = 32;
  const NeiContext ctx(e, data, 3, 7, opts);
  for (int k = 0; k < 5; ++k) {
    const Matrix x = 0.1 + 0.8 * uniform_matrix(3, 2, rng).array();
    Matrix grad;
    ctx.value(x, &grad);
    const Matrix fd = fd_gradient([&](const Matrix& b) { return ctx.value(b); }, x, 1e-6);
    CHECK(max_rel_error(grad, fd) < 1e-4);
  }
}

TEST_CASE("determinism and objective handle") {
  Rng rng(4);
  const HyperEnsemble e = make_ensemble({make_hyper({0.3, 0.5}, 1e-3)});
  const Dataset data{uniform_matrix(4, 2, rng), normal_matrix(4, 1, rng)};
  auto a = std::make_shared<const NeiContext>(e, data, 2, 11);
  const NeiContext b(e, data, 2, 11);
  const Matrix x = uniform_matrix(2, 2, rng);
  CHECK(a->value(x) == b.value(x));
  const Objective f = make_nei_objective(a);
  Matrix g;
  CHECK(f(x, &g) == a->value(x));
  CHECK(g.rows() == 2);
}

TEST_CASE("incumbent perturbations") {
  Vector inc(3);
  inc << 0.01, 0.5, 0.99;
  const auto p = incumbent_perturbations(inc, 2, 384, 0.05, 1);
  REQUIRE(p.size() == 384);
  double sum = 0.0, sq = 0.0;
  for (const Matrix& m : p) {
    CHECK(m.rows() == 2);
    CHECK(m.minCoeff() >= 0.0);
    CHECK(m.maxCoeff() <= 1.0);
    sum += m(0, 1) + m(1, 1);
    sq += (m(0, 1) - 0.5) * (m(0, 1) - 0.5) + (m(1, 1) - 0.5) * (m(1, 1) - 0.5);
  }
  CHECK(std::abs(sum / 768.0 - 0.5) < 0.01);
  CHECK(std::sqrt(sq / 768.0) == doctest::Approx(0.05).epsilon(0.1));
  const auto again = incumbent_perturbations(inc, 2, 384, 0.05, 1);
  CHECK((again[7] - p[7]).cwiseAbs().maxCoeff() == 0.0);
}
