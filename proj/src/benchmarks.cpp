#include "hipe/benchmarks.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace hipe {

namespace {

constexpr std::array<double, 4> kHartmannAlpha = {1.0, 1.2, 3.0, 3.2};
constexpr double kHartmannA[4][6] = {{10, 3, 17, 3.5, 1.7, 8},
                                     {0.05, 10, 17, 0.1, 8, 14},
                                     {3, 3.5, 1.7, 10, 17, 8},
                                     {17, 8, 0.05, 10, 0.1, 14}};
constexpr double kHartmannP[4][6] = {{0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886},
                                     {0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991},
                                     {0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650},
                                     {0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381}};

double hartmann_sum(const Vector& z, int cols) {
  double total = 0.0;
  for (int i = 0; i < 4; ++i) {
    double inner = 0.0;
    for (int j = 0; j < cols; ++j) {
      const double d = z(j) - kHartmannP[i][j];
      inner += kHartmannA[i][j] * d * d;
    }
    total += kHartmannAlpha[static_cast<std::size_t>(i)] * std::exp(-inner);
  }
  return total;
}

Benchmark make(std::string name, int d_eff, int total, std::pair<double, double> bound, double noise_sd,
               double optimum_value, const std::vector<double>& optimum_native,
               std::function<double(const Vector&)> reward) {
  Benchmark b;
  b.name = std::move(name);
  b.effective_dim = d_eff;
  b.total_dim = total;
  b.bounds.assign(static_cast<std::size_t>(d_eff), bound);
  b.noise_sd = noise_sd;
  b.optimum_value = optimum_value;
  b.optimum = Vector::Constant(total, 0.5);
  for (int j = 0; j < d_eff; ++j) {
    b.optimum(j) = (optimum_native[static_cast<std::size_t>(j)] - bound.first) / (bound.second - bound.first);
  }
  b.active.resize(static_cast<std::size_t>(d_eff));
  std::iota(b.active.begin(), b.active.end(), 0);
  b.reward = std::move(reward);
  return b;
}

void check_point(const Benchmark& bench, const Vector& x) {
  if (x.size() != bench.total_dim) {
    throw std::invalid_argument(bench.name + ": expected a point of dimension " + std::to_string(bench.total_dim) +
                                ", got " + std::to_string(x.size()));
  }
  for (Index i = 0; i < x.size(); ++i) {
    if (!(x(i) >= 0.0 && x(i) <= 1.0)) throw std::invalid_argument(bench.name + ": point outside the unit cube");
  }
}

}  // namespace

double ackley(const Vector& z) {
  constexpr double a = 20.0;
  constexpr double b = 0.2;
  constexpr double c = 2.0 * std::numbers::pi;
  const double n = static_cast<double>(z.size());
  const double sq = z.squaredNorm() / n;
  const double cs = (c * z.array()).cos().sum() / n;
  return a * (1.0 - std::exp(-b * std::sqrt(sq))) + (std::numbers::e - std::exp(cs));
}

double hartmann6(const Vector& z) { return -hartmann_sum(z, 6); }

double hartmann4(const Vector& z) { return (1.1 - hartmann_sum(z, 4)) / 0.839; }

void Benchmark::validate() const {
  if (effective_dim < 1 || total_dim < effective_dim) throw std::invalid_argument(name + ": bad dimensions");
  if (!(noise_sd >= 0.0)) throw std::invalid_argument(name + ": negative noise");
  if (static_cast<int>(bounds.size()) != effective_dim || static_cast<int>(active.size()) != effective_dim) {
    throw std::invalid_argument(name + ": bounds/active size mismatch");
  }
  if (!reward) throw std::invalid_argument(name + ": missing reward");
}

Vector to_native(const Benchmark& bench, const Vector& x) {
  check_point(bench, x);
  Vector z(bench.effective_dim);
  for (int j = 0; j < bench.effective_dim; ++j) {
    const auto [lo, hi] = bench.bounds[static_cast<std::size_t>(j)];
    const double u = x(bench.active[static_cast<std::size_t>(j)]);
    // Exact at both ends of the interval.
    z(j) = u == 1.0 ? hi : lo + u * (hi - lo);
  }
  return z;
}

double true_value(const Benchmark& bench, const Vector& x) { return bench.reward(to_native(bench, x)); }

double evaluate(const Benchmark& bench, const Vector& x, Rng& rng) {
  const double f = true_value(bench, x);
  return bench.noise_sd > 0.0 ? f + bench.noise_sd * standard_normal(rng) : f;
}

Vector true_values(const Benchmark& bench, const Matrix& x) {
  Vector out(x.rows());
  for (Index i = 0; i < x.rows(); ++i) out(i) = true_value(bench, Vector(x.row(i).transpose()));
  return out;
}

Vector evaluate_batch(const Benchmark& bench, const Matrix& x, Rng& rng) {
  Vector out(x.rows());
  for (Index i = 0; i < x.rows(); ++i) out(i) = evaluate(bench, Vector(x.row(i).transpose()), rng);
  return out;
}

std::vector<Benchmark> registry() {
  const std::vector<double> h6_opt = {0.20168950725118004, 0.15001068938946577, 0.47687397427549577,
                                      0.27533242839179606, 0.31165161679481873, 0.6573005288140765};
  const std::vector<double> h4_opt = {0.18739526879558038, 0.1941515256508525, 0.5579177766162052,
                                      0.2647796200666434};
  const double h6_best = 3.322368011415514;
  const double h4_best = 3.1344941412223988;
  auto neg_ackley = [](const Vector& z) { return -ackley(z); };
  auto neg_h6 = [](const Vector& z) { return -hartmann6(z); };
  auto neg_h4 = [](const Vector& z) { return -hartmann4(z); };

  std::vector<Benchmark> noisy = {
      make("ackley_4d", 4, 4, {-5.0, 10.0}, 2.0, 0.0, std::vector<double>(4, 0.0), neg_ackley),
      make("hartmann6_6d", 6, 6, {0.0, 1.0}, 0.5, h6_best, h6_opt, neg_h6),
      make("hartmann6_12d", 6, 12, {0.0, 1.0}, 0.5, h6_best, h6_opt, neg_h6),
      make("hartmann4_4d", 4, 4, {0.0, 1.0}, 0.5, h4_best, h4_opt, neg_h4),
      make("hartmann4_8d", 4, 8, {0.0, 1.0}, 0.5, h4_best, h4_opt, neg_h4),
  };
  std::vector<Benchmark> all = noisy;
  for (Benchmark b : noisy) {
    b.name += "_noiseless";
    b.noise_sd = 0.0;
    all.push_back(std::move(b));
  }
  return all;
}

std::vector<std::string> benchmark_names() {
  std::vector<std::string> names;
  for (const Benchmark& b : registry()) names.push_back(b.name);
  return names;
}

Benchmark find_benchmark(const std::string& name) {
  for (Benchmark& b : registry()) {
    if (b.name == name) return b;
  }
  throw std::invalid_argument("unknown benchmark '" + name + "'");
}

Benchmark permute_dimensions(const Benchmark& bench, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> perm(static_cast<std::size_t>(bench.total_dim));
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = bench.total_dim - 1; i > 0; --i) {
    const int j = std::min(i, static_cast<int>(uniform01(rng) * (i + 1)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  Benchmark out = bench;
  out.optimum = Vector::Constant(bench.total_dim, 0.5);
  for (int j = 0; j < bench.effective_dim; ++j) {
    const int col = perm[static_cast<std::size_t>(bench.active[static_cast<std::size_t>(j)])];
    out.active[static_cast<std::size_t>(j)] = col;
    out.optimum(col) = bench.optimum(bench.active[static_cast<std::size_t>(j)]);
  }
  return out;
}

}  // namespace hipe
