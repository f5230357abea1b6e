// Model-free initial designs on the unit cube.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>

namespace hipe {

enum class DesignMethod { kSobol, kRandom, kLhs, kLhsBeta };

DesignMethod parse_design_method(const std::string& name);
std::string to_string(DesignMethod method);
/// True for names accepted by parse_design_method.
bool is_design_method(const std::string& name);

struct DesignRequest {
  int q = 1;
  int dim = 1;
  std::uint64_t seed = 0;
  /// Replace the first row by the cube center (q is unchanged).
  bool include_center = false;
  /// Sobol only: scrambled by default; index of the first sequence point.
  bool scramble = true;
  std::uint64_t sequence_offset = 0;
  /// LHS-Beta target distribution of normalized pairwise distances.
  double beta_a = 2.0;
  double beta_b = 5.0;
  int beta_iterations = 2000;

  static constexpr int kMaxDim = 64;
  void validate() const;
};

Eigen::MatrixXd sobol_design(const DesignRequest& req);
Eigen::MatrixXd lhs_design(const DesignRequest& req);
/// Latin hypercube refined by within-column swaps that lower the KS distance
/// between normalized pairwise distances and a Beta(a, b) CDF.
Eigen::MatrixXd lhs_beta_design(const DesignRequest& req);
Eigen::MatrixXd random_design(const DesignRequest& req);

Eigen::MatrixXd make_design(DesignMethod method, const DesignRequest& req);

/// KS distance between the pairwise distances of the rows (divided by
/// sqrt(D)) and the Beta(a, b) CDF.
double pairwise_distance_ks(const Eigen::MatrixXd& points, double beta_a, double beta_b);

}  // namespace hipe
