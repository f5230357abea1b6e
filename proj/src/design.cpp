#include "hipe/design.hpp"

#include "hipe/random.hpp"
#include "hipe/sobol.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace hipe {

namespace {

void inject_center(Eigen::MatrixXd& x, bool include_center) {
  if (include_center && x.rows() > 0) x.row(0).setConstant(0.5);
}

std::vector<int> permutation(int n, Rng& rng) {
  std::vector<int> p(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(uniform01(rng) * (i + 1));
    std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(std::min(j, i))]);
  }
  return p;
}

Eigen::MatrixXd plain_lhs(const DesignRequest& req) {
  Rng rng(req.seed);
  Eigen::MatrixXd x(req.q, req.dim);
  for (int d = 0; d < req.dim; ++d) {
    const std::vector<int> perm = permutation(req.q, rng);
    for (int i = 0; i < req.q; ++i) {
      x(i, d) = (perm[static_cast<std::size_t>(i)] + uniform01(rng)) / static_cast<double>(req.q);
    }
  }
  return x;
}

}  // namespace

DesignMethod parse_design_method(const std::string& name) {
  if (name == "sobol") return DesignMethod::kSobol;
  if (name == "random") return DesignMethod::kRandom;
  if (name == "lhs") return DesignMethod::kLhs;
  if (name == "lhs-beta") return DesignMethod::kLhsBeta;
  throw std::invalid_argument("unknown design method '" + name + "'");
}

std::string to_string(DesignMethod method) {
  switch (method) {
    case DesignMethod::kSobol: return "sobol";
    case DesignMethod::kRandom: return "random";
    case DesignMethod::kLhs: return "lhs";
    case DesignMethod::kLhsBeta: return "lhs-beta";
  }
  return "unknown";
}

bool is_design_method(const std::string& name) {
  return name == "sobol" || name == "random" || name == "lhs" || name == "lhs-beta";
}

void DesignRequest::validate() const {
  if (q < 1) throw std::invalid_argument("design: q must be >= 1");
  if (dim < 1 || dim > kMaxDim) {
    throw std::invalid_argument("design: dimension must be in [1, " + std::to_string(kMaxDim) + "]");
  }
  if (!(beta_a > 0.0) || !(beta_b > 0.0)) throw std::invalid_argument("design: Beta shapes must be positive");
  if (beta_iterations < 0) throw std::invalid_argument("design: iteration budget must be non-negative");
}

Eigen::MatrixXd sobol_design(const DesignRequest& req) {
  req.validate();
  const SobolSequence seq(req.dim, req.scramble, req.seed);
  // The unscrambled sequence starts at the origin, which is skipped.
  const std::uint64_t first = req.sequence_offset + (req.scramble ? 0 : 1);
  Eigen::MatrixXd x = seq.points(first, static_cast<std::uint64_t>(req.q));
  inject_center(x, req.include_center);
  return x;
}

Eigen::MatrixXd lhs_design(const DesignRequest& req) {
  req.validate();
  Eigen::MatrixXd x = plain_lhs(req);
  inject_center(x, req.include_center);
  return x;
}

double pairwise_distance_ks(const Eigen::MatrixXd& points, double beta_a, double beta_b) {
  const Eigen::Index n = points.rows();
  if (n < 2) return 0.0;
  const double norm = std::sqrt(static_cast<double>(points.cols()));
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) dist.push_back((points.row(i) - points.row(j)).norm() / norm);
  std::sort(dist.begin(), dist.end());
  const double k = static_cast<double>(dist.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const double cdf = boost::math::ibeta(beta_a, beta_b, std::clamp(dist[i], 0.0, 1.0));
    ks = std::max({ks, static_cast<double>(i + 1) / k - cdf, cdf - static_cast<double>(i) / k});
  }
  return ks;
}

Eigen::MatrixXd lhs_beta_design(const DesignRequest& req) {
  req.validate();
  Eigen::MatrixXd x = plain_lhs(req);
  if (req.q >= 2 && req.beta_iterations > 0) {
    Rng rng(derive_seed(req.seed, 0x1b5));
    double current = pairwise_distance_ks(x, req.beta_a, req.beta_b);
    for (int it = 0; it < req.beta_iterations; ++it) {
      const int d = static_cast<int>(uniform01(rng) * req.dim);
      const int i = static_cast<int>(uniform01(rng) * req.q);
      int j = static_cast<int>(uniform01(rng) * (req.q - 1));
      if (j >= i) ++j;
      std::swap(x(i, d), x(j, d));
      const double candidate = pairwise_distance_ks(x, req.beta_a, req.beta_b);
      if (candidate < current) {
        current = candidate;
      } else {
        std::swap(x(i, d), x(j, d));
      }
    }
  }
  inject_center(x, req.include_center);
  return x;
}

Eigen::MatrixXd random_design(const DesignRequest& req) {
  req.validate();
  Rng rng(req.seed);
  Eigen::MatrixXd x = uniform_matrix(req.q, req.dim, rng);
  inject_center(x, req.include_center);
  return x;
}

Eigen::MatrixXd make_design(DesignMethod method, const DesignRequest& req) {
  switch (method) {
    case DesignMethod::kSobol: return sobol_design(req);
    case DesignMethod::kRandom: return random_design(req);
    case DesignMethod::kLhs: return lhs_design(req);
    case DesignMethod::kLhsBeta: return lhs_beta_design(req);
  }
  throw std::invalid_argument("make_design: unknown method");
}

}  // namespace hipe
