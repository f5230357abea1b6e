// Sobol low-discrepancy sequence with optional linear matrix scrambling and
// digital shift.
#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <vector>

namespace hipe {

class SobolSequence {
 public:
  static constexpr int kBits = 32;

  /// Number of dimensions covered by the built-in direction-number table.
  static int max_dimension();

  /// Unscrambled when scramble is false; the seed is then ignored.
  SobolSequence(int dim, bool scramble, std::uint64_t seed = 0);

  int dim() const { return dim_; }

  /// Points with indices [first, first + count) in Gray-code order, count x dim.
  /// Index 0 of the unscrambled sequence is the origin.
  Eigen::MatrixXd points(std::uint64_t first, std::uint64_t count) const;

 private:
  int dim_;
  // direction_[d][k] holds the k-th direction integer of dimension d.
  std::vector<std::array<std::uint32_t, kBits>> direction_;
  std::vector<std::uint32_t> shift_;
};

/// Standard-normal quasi-random draws: the first rows points of a scrambled
/// cols-dimensional Sobol sequence mapped through the normal quantile.
Eigen::MatrixXd sobol_normal_draws(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed);

}  // namespace hipe
