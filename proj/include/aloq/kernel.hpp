#pragma once

#include <cmath>
#include <stdexcept>

#include "aloq/common.hpp"

namespace aloq {

/// Squared-exponential kernel hyperparameters,
///
///   k(x, x') = w0 * exp( -1/2 * sum_d (x_d - x'_d)^2 / w_d^2 ),
///
/// plus the observation noise variance added on the Gram diagonal.
struct KernelHyper {
  double signal_var = 1.0;  // w0
  Vec lengthscales;         // w_d, one per input dimension
  double noise_var = 0.0;

  void validate() const {
    if (!(signal_var > 0.0) || !std::isfinite(signal_var))
      throw std::invalid_argument("KernelHyper: signal variance must be positive");
    if (lengthscales.size() == 0) throw std::invalid_argument("KernelHyper: no lengthscales");
    for (int d = 0; d < lengthscales.size(); ++d)
      if (!(lengthscales[d] > 0.0) || !std::isfinite(lengthscales[d]))
        throw std::invalid_argument("KernelHyper: lengthscales must be positive");
    if (!(noise_var >= 0.0) || !std::isfinite(noise_var))
      throw std::invalid_argument("KernelHyper: noise variance must be non-negative");
  }
};

inline double se_kernel(const Vec& a, const Vec& b, const KernelHyper& h) {
  if (a.size() != b.size() || a.size() != h.lengthscales.size())
    throw std::invalid_argument("se_kernel: dimension mismatch");
  double q = 0.0;
  for (int d = 0; d < a.size(); ++d) {
    const double z = (a[d] - b[d]) / h.lengthscales[d];
    q += z * z;
  }
  return h.signal_var * std::exp(-0.5 * q);
}

/// Unit-amplitude SE correlation matrix between row sets A (n x D) and
/// B (m x D) over the given lengthscales; the caller multiplies by w0.
inline Mat se_corr_cross(const Mat& A, const Mat& B, const Vec& ls) {
  if (A.cols() != B.cols() || A.cols() != ls.size())
    throw std::invalid_argument("se_corr_cross: dimension mismatch");
  // ||a-b||^2 accumulated per dimension after lengthscale division, done as
  // a2 + b2' - 2ab' so the inner product runs through a single GEMM.
  Mat As = A.array().rowwise() / ls.transpose().array();
  Mat Bs = B.array().rowwise() / ls.transpose().array();
  Vec a2 = As.rowwise().squaredNorm();
  Vec b2 = Bs.rowwise().squaredNorm();
  Mat Q = (-2.0 * (As * Bs.transpose())).colwise() + a2;
  Q.rowwise() += b2.transpose();
  return (-0.5 * Q.array().max(0.0)).exp().matrix();
}

/// Symmetric unit-amplitude SE correlation Gram of rows of A.
inline Mat se_corr_gram(const Mat& A, const Vec& ls) {
  Mat K = se_corr_cross(A, A, ls);
  K.diagonal().setOnes();
  // Exact symmetry keeps the Cholesky well behaved.
  K = 0.5 * (K + K.transpose()).eval();
  return K;
}

}  // namespace aloq
