#include "hipe/sobol.hpp"

#include "hipe/random.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hipe {

namespace {

struct DirectionEntry {
  std::uint32_t poly;  // primitive polynomial incl. leading and trailing terms
  std::array<std::uint32_t, 16> m;
};

constexpr DirectionEntry kTable[] = {
#include "sobol_direction_numbers.inc"
};

constexpr int kTableSize = static_cast<int>(sizeof(kTable) / sizeof(kTable[0]));

std::array<std::uint32_t, SobolSequence::kBits> direction_numbers(int d) {
  constexpr int bits = SobolSequence::kBits;
  std::array<std::uint32_t, bits> v{};
  if (d == 0) {
    for (int k = 0; k < bits; ++k) v[k] = 1u << (bits - 1 - k);
    return v;
  }
  const DirectionEntry& e = kTable[d];
  const int degree = std::bit_width(e.poly) - 1;
  for (int k = 0; k < degree && k < bits; ++k) v[k] = e.m[k] << (bits - 1 - k);
  for (int k = degree; k < bits; ++k) {
    std::uint32_t value = v[k - degree] ^ (v[k - degree] >> degree);
    for (int j = 1; j < degree; ++j) {
      if ((e.poly >> (degree - j)) & 1u) value ^= v[k - j];
    }
    v[k] = value;
  }
  return v;
}

}  // namespace

int SobolSequence::max_dimension() { return kTableSize; }

SobolSequence::SobolSequence(int dim, bool scramble, std::uint64_t seed) : dim_(dim) {
  if (dim < 1 || dim > kTableSize) {
    throw std::invalid_argument("Sobol dimension " + std::to_string(dim) + " outside [1, " +
                                std::to_string(kTableSize) + "]");
  }
  direction_.resize(static_cast<std::size_t>(dim));
  shift_.assign(static_cast<std::size_t>(dim), 0u);
  Rng rng(seed);
  for (int d = 0; d < dim; ++d) {
    auto v = direction_numbers(d);
    if (scramble) {
      // Random lower-triangular binary matrix with unit diagonal applied to
      // every direction integer (bit 0 is the most significant digit).
      std::array<std::uint32_t, kBits> rows{};
      for (int r = 0; r < kBits; ++r) {
        const std::uint32_t below = static_cast<std::uint32_t>(rng() >> 32);
        const std::uint32_t diag = 1u << (kBits - 1 - r);
        const std::uint32_t mask = r == 0 ? 0u : ~((diag << 1) - 1u);  // strictly more significant digits
        rows[r] = (below & mask) | diag;
      }
      for (auto& dir : v) {
        std::uint32_t out = 0;
        for (int r = 0; r < kBits; ++r) {
          if (std::popcount(rows[r] & dir) & 1) out |= 1u << (kBits - 1 - r);
        }
        dir = out;
      }
      shift_[static_cast<std::size_t>(d)] = static_cast<std::uint32_t>(rng() >> 32);
    }
    direction_[static_cast<std::size_t>(d)] = v;
  }
}

Eigen::MatrixXd SobolSequence::points(std::uint64_t first, std::uint64_t count) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(count), dim_);
  std::vector<std::uint32_t> state(static_cast<std::size_t>(dim_), 0u);
  // State of index `first` directly from its Gray code.
  const std::uint64_t gray = first ^ (first >> 1);
  for (int k = 0; k < kBits; ++k) {
    if ((gray >> k) & 1u) {
      for (int d = 0; d < dim_; ++d) state[static_cast<std::size_t>(d)] ^= direction_[static_cast<std::size_t>(d)][k];
    }
  }
  constexpr double kScale = 1.0 / 4294967296.0;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t index = first + i;
    if (i > 0) {
      const int bit = std::countr_zero(index);
      if (bit >= kBits) throw std::out_of_range("Sobol index exceeds 2^32");
      for (int d = 0; d < dim_; ++d) state[static_cast<std::size_t>(d)] ^= direction_[static_cast<std::size_t>(d)][bit];
    }
    for (int d = 0; d < dim_; ++d) {
      const std::uint32_t x = state[static_cast<std::size_t>(d)] ^ shift_[static_cast<std::size_t>(d)];
      out(static_cast<Eigen::Index>(i), d) = static_cast<double>(x) * kScale;
    }
  }
  return out;
}

Eigen::MatrixXd sobol_normal_draws(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  const SobolSequence seq(static_cast<int>(cols), /*scramble=*/true, seed);
  Eigen::MatrixXd u = seq.points(0, static_cast<std::uint64_t>(rows));
  static constexpr double kEdge = 0x1.0p-53;
  return u.unaryExpr([](double v) {
    return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * std::clamp(v, kEdge, 1.0 - kEdge));
  });
}

}  // namespace hipe
