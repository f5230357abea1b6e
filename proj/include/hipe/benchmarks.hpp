// Synthetic test functions on the unit cube, negated so that the harness
// always maximizes.
#pragma once

#include "hipe/gp_core.hpp"
#include "hipe/random.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace hipe {

struct Benchmark {
  std::string name;
  int effective_dim = 0;
  int total_dim = 0;
  /// Native interval per effective dimension.
  std::vector<std::pair<double, double>> bounds;
  double noise_sd = 0.0;
  /// Reward at the optimum and its location in unit-cube coordinates (dummy
  /// coordinates set to 0.5).
  double optimum_value = 0.0;
  Vector optimum;
  /// Unit-cube columns feeding the effective dimensions, in order.
  std::vector<int> active;
  /// Reward as a function of native coordinates of the effective dimensions.
  std::function<double(const Vector&)> reward;

  void validate() const;
};

/// Native coordinates of the effective dimensions for a unit-cube point.
Vector to_native(const Benchmark& bench, const Vector& x);

double true_value(const Benchmark& bench, const Vector& x);
double evaluate(const Benchmark& bench, const Vector& x, Rng& rng);
/// Row-wise versions; noise draws are taken in row order.
Vector true_values(const Benchmark& bench, const Matrix& x);
Vector evaluate_batch(const Benchmark& bench, const Matrix& x, Rng& rng);

/// Classical minimization forms in native coordinates.
double ackley(const Vector& z);
double hartmann6(const Vector& z);
double hartmann4(const Vector& z);

/// Five noisy rows plus a "_noiseless" twin of each.
std::vector<Benchmark> registry();
std::vector<std::string> benchmark_names();
/// Throws std::invalid_argument for unknown names.
Benchmark find_benchmark(const std::string& name);

/// Same function with the active columns scattered by a seeded permutation.
Benchmark permute_dimensions(const Benchmark& bench, std::uint64_t seed);

}  // namespace hipe
