#include "hipe/hyper_inference.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

using namespace hipe;
using namespace hipe::testing;

namespace {

double lognormal_ref(double x, double m, double s) {
  const double z = (std::log(x) - m) / s;
  return -std::log(x * s * std::sqrt(2.0 * std::numbers::pi)) - 0.5 * z * z;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("prior defaults scale with dimension") {
  const HyperPriorSpec s4 = HyperPriorSpec::defaults(4);
  const HyperPriorSpec s16 = HyperPriorSpec::defaults(16);
  CHECK(s4.lengthscale_logmean == doctest::Approx(0.75 + 0.5 * std::log(4.0)).epsilon(1e-15));
  CHECK(s16.lengthscale_logmean - s4.lengthscale_logmean == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(s4.lengthscale_logsd == 0.75);
  CHECK(s4.noise_sd_logmean == -5.5);
  CHECK(s4.mean_prior_var == 0.25);
  CHECK(s4.signal.fixed);
  CHECK(HyperPriorSpec::defaults(1, -0.75).lengthscale_logmean == -0.75);
  HyperPriorSpec bad = s4;
  bad.noise_sd_logsd = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("log prior against independently coded densities") {
  const HyperPriorSpec spec = HyperPriorSpec::defaults(3);
  Rng rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    HyperSample h = random_hyper(3, rng);
    h.signal_var = 1.0;
    double want = 0.0;
    for (Index d = 0; d < 3; ++d) want += lognormal_ref(h.lengthscales(d), spec.lengthscale_logmean, 0.75);
    want += lognormal_ref(std::sqrt(h.noise_var), -5.5, 0.75);
    want += -0.5 * std::log(2.0 * std::numbers::pi * 0.25) - h.mean_const * h.mean_const / 0.5;
    CHECK(log_prior(h, spec) == doctest::Approx(want).epsilon(1e-12));

    HyperSample doubled = h;
    doubled.lengthscales(1) *= 2.0;
    const double inc = lognormal_ref(doubled.lengthscales(1), spec.lengthscale_logmean, 0.75) -
                       lognormal_ref(h.lengthscales(1), spec.lengthscale_logmean, 0.75);
    CHECK(log_prior(doubled, spec) - log_prior(h, spec) == doctest::Approx(inc).epsilon(1e-10));
  }
  CHECK_THROWS_AS(log_prior(random_hyper(2, rng), spec), std::invalid_argument);
}

TEST_CASE("schedule and thinning") {
  McmcSchedule sched;
  CHECK(sched.num_samples() == 12);
  sched.draws = 10;
  sched.thin = 24;
  CHECK_THROWS_AS(sched.validate(), std::invalid_argument);

  Rng rng(2);
  const Dataset data{uniform_matrix(10, 2, rng), normal_matrix(10, 1, rng)};
  const McmcSchedule small{20, 35, 7};
  const HyperEnsemble e = sample_ensemble(data, HyperPriorSpec::defaults(2), small, 9);
  CHECK(e.size() == 5);
  CHECK(e.source == EnsembleSource::kPosterior);
  CHECK(e.diagnostics.log_posteriors.size() == 5);
  for (double lp : e.diagnostics.log_posteriors) CHECK(std::isfinite(lp));
}

TEST_CASE("sampling is deterministic given the seed") {
  Rng rng(3);
  const Dataset data{uniform_matrix(12, 3, rng), normal_matrix(12, 1, rng)};
  const HyperPriorSpec spec = HyperPriorSpec::defaults(3);
  const McmcSchedule sched{30, 60, 6};
  const HyperEnsemble a = sample_ensemble(data, spec, sched, 42);
  const HyperEnsemble b = sample_ensemble(data, spec, sched, 42);
  const HyperEnsemble c = sample_ensemble(data, spec, sched, 43);
  bool differs = false;
  for (Index m = 0; m < a.size(); ++m) {
    const auto& x = a.samples[static_cast<std::size_t>(m)];
    const auto& y = b.samples[static_cast<std::size_t>(m)];
    CHECK((x.lengthscales.array() == y.lengthscales.array()).all());
    CHECK(x.noise_var == y.noise_var);
    CHECK(x.mean_const == y.mean_const);
    differs = differs || x.mean_const != c.samples[static_cast<std::size_t>(m)].mean_const;
  }
  CHECK(differs);
}

TEST_CASE("empty-data chain recovers the prior") {
  const HyperPriorSpec spec = HyperPriorSpec::defaults(2);
  const McmcSchedule sched{200, 100000, 10};
  const HyperEnsemble chain = sample_ensemble(Dataset::empty(2), spec, sched, 5);
  REQUIRE(chain.size() == 10000);
  CHECK(chain.source == EnsembleSource::kPrior);
  std::vector<double> log_ls, log_noise, mean_c;
  double sum = 0.0;
  for (const auto& s : chain.samples) {
    log_ls.push_back(std::log(s.lengthscales(0)));
    log_noise.push_back(0.5 * std::log(s.noise_var));
    mean_c.push_back(s.mean_const);
    sum += log_ls.back();
  }
  const double se = spec.lengthscale_logsd / std::sqrt(static_cast<double>(chain.size()));
  CHECK(std::abs(sum / chain.size() - spec.lengthscale_logmean) < 3.0 * se);

  // 1,000 chain draws against 1,000 direct prior draws.
  const HyperEnsemble direct = sample_prior(spec, 1000, 6);
  std::vector<double> dl, dn, dc, cl, cn, cc;
  for (std::size_t i = 0; i < 1000; ++i) {
    cl.push_back(log_ls[i * 10]);
    cn.push_back(log_noise[i * 10]);
    cc.push_back(mean_c[i * 10]);
    dl.push_back(std::log(direct.samples[i].lengthscales(0)));
    dn.push_back(0.5 * std::log(direct.samples[i].noise_var));
    dc.push_back(direct.samples[i].mean_const);
  }
  CHECK(ks_two_sample(cl, dl) < 0.1);
  CHECK(ks_two_sample(cn, dn) < 0.1);
  CHECK(ks_two_sample(cc, dc) < 0.1);
}

TEST_CASE("posterior recovers known lengthscales") {
  HyperSample truth;
  truth.lengthscales = Vector(2);
  truth.lengthscales << 0.2, 2.0;
  truth.noise_var = 1e-4;
  Rng rng(7);
  const Matrix x = uniform_matrix(60, 2, rng);
  Matrix k = kernel_matrix(x, x, truth);
  k.diagonal().array() += truth.noise_var;
  const Eigen::LLT<Matrix> llt(k);
  const Vector y = llt.matrixL() * normal_matrix(60, 1, rng);
  const HyperEnsemble e = sample_ensemble({x, y}, HyperPriorSpec::defaults(2), McmcSchedule{}, 11);
  REQUIRE(e.size() == 12);
  for (Index d = 0; d < 2; ++d) {
    std::vector<double> ls;
    for (const auto& s : e.samples) ls.push_back(s.lengthscales(d));
    const double med = median(ls);
    CHECK(med > 0.5 * truth.lengthscales(d));
    CHECK(med < 2.0 * truth.lengthscales(d));
  }
}

TEST_CASE("direct prior sampling") {
  const HyperEnsemble e = sample_prior(HyperPriorSpec::defaults(3), 7, 1);
  CHECK(e.size() == 7);
  CHECK(e.dim() == 3);
  CHECK(e.source == EnsembleSource::kPrior);
  CHECK_NOTHROW(e.validate());
  CHECK_THROWS_AS(sample_prior(HyperPriorSpec::defaults(3), 0, 1), std::invalid_argument);
}
