#pragma once

#include <boost/math/special_functions/beta.hpp>

#include <cmath>
#include <stdexcept>

#include "aloq/common.hpp"

namespace aloq {

/// Per-dimension Beta CDF input warp. alpha = beta = 1 in every dimension is
/// the identity, so an unwarped model is the special case of a warped one.
struct WarpParams {
  Vec alpha;
  Vec beta;

  static WarpParams identity(int dim) {
    WarpParams w;
    w.alpha = Vec::Ones(dim);
    w.beta = Vec::Ones(dim);
    return w;
  }

  bool is_identity() const {
    return (alpha.array() == 1.0).all() && (beta.array() == 1.0).all();
  }

  int dim() const { return static_cast<int>(alpha.size()); }
};

/// BetaCDF(x; a, b) for a single coordinate. Monotone bijection of [0,1] with
/// fixed endpoints.
inline double beta_cdf(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
    throw std::domain_error("beta_cdf: shape parameters must be positive and finite");
  if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("beta_cdf: input outside [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  if (a == 1.0 && b == 1.0) return x;  // identity warp, bit-exact
  return boost::math::ibeta(a, b, x);
}

/// Warps one point, dimension by dimension.
inline Vec beta_warp(const Vec& x, const WarpParams& w) {
  if (x.size() != w.alpha.size() || x.size() != w.beta.size())
    throw std::invalid_argument("beta_warp: dimension mismatch");
  Vec out(x.size());
  for (int d = 0; d < x.size(); ++d) out[d] = beta_cdf(x[d], w.alpha[d], w.beta[d]);
  return out;
}

/// Warps each row of a matrix of points.
inline Mat beta_warp_rows(const Mat& X, const WarpParams& w) {
  if (X.cols() != w.alpha.size())
    throw std::invalid_argument("beta_warp_rows: dimension mismatch");
  Mat out(X.rows(), X.cols());
  for (int d = 0; d < X.cols(); ++d) {
    const double a = w.alpha[d], b = w.beta[d];
    for (int i = 0; i < X.rows(); ++i) out(i, d) = beta_cdf(X(i, d), a, b);
  }
  return out;
}

/// Warps a single column (used when only one dimension's parameters moved).
inline void beta_warp_column(const Mat& X, int d, double a, double b, Vec& out) {
  out.resize(X.rows());
  for (int i = 0; i < X.rows(); ++i) out[i] = beta_cdf(X(i, d), a, b);
}

}  // namespace aloq
