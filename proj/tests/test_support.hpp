// Independent reference implementations and helpers shared by the tests.
// Nothing here calls into the library's linear algebra.
#pragma once

#include "hipe/gp_core.hpp"
#include "hipe/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace hipe::testing {

inline double matern52_ref(double r) {
  const double s = std::sqrt(5.0) * r;
  return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

inline Matrix kernel_ref(const Matrix& a, const Matrix& b, const HyperSample& h, bool rbf = false) {
  Matrix k(a.rows(), b.rows());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < b.rows(); ++j) {
      double r2 = 0.0;
      for (Index d = 0; d < a.cols(); ++d) {
        const double z = (a(i, d) - b(j, d)) / h.lengthscales(d);
        r2 += z * z;
      }
      k(i, j) = h.signal_var * (rbf ? std::exp(-0.5 * r2) : matern52_ref(std::sqrt(r2)));
    }
  }
  return k;
}

/// Posterior by explicit inversion of the noisy Gram matrix.
inline PosteriorGaussian posterior_ref(const Matrix& x, const Vector& y, const HyperSample& h, const Matrix& q,
                                       bool noisy) {
  Matrix gram = kernel_ref(x, x, h);
  gram += h.effective_noise_var() * Matrix::Identity(x.rows(), x.rows());
  const Matrix inv = gram.fullPivLu().inverse();
  const Matrix kqx = kernel_ref(q, x, h);
  PosteriorGaussian out;
  out.mean = Vector::Constant(q.rows(), h.mean_const) + kqx * inv * (y.array() - h.mean_const).matrix();
  out.covariance = kernel_ref(q, q, h) - kqx * inv * kqx.transpose();
  if (noisy) out.covariance += h.effective_noise_var() * Matrix::Identity(q.rows(), q.rows());
  return out;
}

inline double log_marginal_ref(const Matrix& x, const Vector& y, const HyperSample& h) {
  Matrix gram = kernel_ref(x, x, h);
  gram += h.effective_noise_var() * Matrix::Identity(x.rows(), x.rows());
  const Vector r = y.array() - h.mean_const;
  const double n = static_cast<double>(x.rows());
  return -0.5 * r.dot(gram.fullPivLu().solve(r)) - 0.5 * std::log(gram.determinant()) -
         0.5 * n * std::log(2.0 * std::numbers::pi);
}

inline HyperSample random_hyper(Index dim, Rng& rng) {
  HyperSample h;
  h.lengthscales = (0.2 + 1.3 * uniform_matrix(dim, 1, rng).array()).matrix();
  h.noise_var = std::exp(-6.0 + 5.0 * uniform01(rng));
  h.signal_var = 0.5 + uniform01(rng);
  h.mean_const = standard_normal(rng) * 0.3;
  return h;
}

/// Central differences of a scalar function of a matrix, entry by entry.
inline Matrix fd_gradient(const std::function<double(const Matrix&)>& f, const Matrix& x, double step = 1e-6) {
  Matrix g(x.rows(), x.cols());
  Matrix probe = x;
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      probe(i, j) = x(i, j) + step;
      const double hi = f(probe);
      probe(i, j) = x(i, j) - step;
      const double lo = f(probe);
      probe(i, j) = x(i, j);
      g(i, j) = (hi - lo) / (2.0 * step);
    }
  }
  return g;
}

inline double max_rel_error(const Matrix& a, const Matrix& b) {
  const double scale = std::max(1e-12, b.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

/// 1-based ranks, ties sharing their mean rank.
inline Vector average_ranks(const Vector& v) {
  const Index n = v.size();
  std::vector<Index> idx(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  std::sort(idx.begin(), idx.end(), [&](Index a, Index b) { return v(a) < v(b); });
  Vector r(n);
  for (Index i = 0; i < n;) {
    Index j = i;
    while (j + 1 < n && v(idx[static_cast<std::size_t>(j + 1)]) == v(idx[static_cast<std::size_t>(i)])) ++j;
    for (Index k = i; k <= j; ++k) r(idx[static_cast<std::size_t>(k)]) = 0.5 * static_cast<double>(i + j) + 1.0;
    i = j + 1;
  }
  return r;
}

inline double spearman(const Vector& a, const Vector& b) {
  const Vector ra = average_ranks(a);
  const Vector rb = average_ranks(b);
  const Vector ca = ra.array() - ra.mean();
  const Vector cb = rb.array() - rb.mean();
  return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
}

}  // namespace hipe::testing
