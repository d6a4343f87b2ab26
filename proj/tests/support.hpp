#pragma once

// Shared reference implementations for the test suites. Everything here is
// deliberately the slow, obvious version of what the library computes with
// caching and factor reuse: dense matrix inverses, exhaustive sums, rotation
// matrices composed step by step. Tests compare library output against these.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "aloq/arm.hpp"
#include "aloq/common.hpp"
#include "aloq/gp.hpp"
#include "aloq/quadrature.hpp"
#include "aloq/rng.hpp"
#include "aloq/tasks.hpp"
#include "aloq/warp.hpp"

namespace testsupport {

using aloq::Mat;
using aloq::Vec;

// ---------------------------------------------------------------------------
// Dense Gaussian-process prediction: per hyperparameter sample, warp, build
// the full Gram matrix, invert it outright, and mix the per-sample Gaussians.
// No Cholesky reuse, no jitter ladder, no incremental updates.
// ---------------------------------------------------------------------------

struct DensePrediction {
  Vec mean;
  Mat cov;
};

inline DensePrediction dense_gp_predict(const aloq::Dataset& data,
                                        const std::vector<aloq::HyperSample>& samples,
                                        const aloq::GpConfig& cfg, const Mat& queries) {
  const long l = data.size();
  const long m = queries.rows();
  double ym = 0.0, ys = 1.0;
  if (cfg.normalize_y && l > 0) {
    ym = data.values().mean();
    if (l > 1) {
      const double var =
          (data.values().array() - ym).square().sum() / static_cast<double>(l);
      ys = std::sqrt(var);
    }
    if (!(ys > 1e-12)) ys = 1.0;
  }
  const Mat X = data.inputs();
  const Vec yz = l > 0 ? ((data.values().array() - ym) / ys).matrix().eval() : Vec(0);

  DensePrediction mix;
  mix.mean = Vec::Zero(m);
  mix.cov = Mat::Zero(m, m);
  const double inv_s = 1.0 / static_cast<double>(samples.size());
  for (const aloq::HyperSample& h : samples) {
    const Mat Xw = cfg.warp_enabled ? aloq::beta_warp_rows(X, h.warp) : X;
    const Mat Qw = cfg.warp_enabled ? aloq::beta_warp_rows(queries, h.warp) : queries;
    Mat Kqq(m, m);
    for (long i = 0; i < m; ++i)
      for (long j = 0; j < m; ++j)
        Kqq(i, j) = aloq::se_kernel(Qw.row(i).transpose(), Qw.row(j).transpose(), h.kernel);
    Vec mean_s;
    Mat cov_s;
    if (l == 0) {
      mean_s = Vec::Constant(m, ym);
      cov_s = ys * ys * Kqq;
    } else {
      Mat K(l, l);
      for (long i = 0; i < l; ++i)
        for (long j = 0; j < l; ++j)
          K(i, j) = aloq::se_kernel(Xw.row(i).transpose(), Xw.row(j).transpose(), h.kernel);
      K.diagonal().array() += h.kernel.noise_var;
      Mat Ks(l, m);
      for (long i = 0; i < l; ++i)
        for (long j = 0; j < m; ++j)
          Ks(i, j) = aloq::se_kernel(Xw.row(i).transpose(), Qw.row(j).transpose(), h.kernel);
      const Mat Kinv = K.inverse();
      mean_s = (ym + (ys * (Ks.transpose() * (Kinv * yz))).array()).matrix();
      cov_s = ys * ys * (Kqq - Ks.transpose() * Kinv * Ks);
    }
    mix.mean += inv_s * mean_s;
    mix.cov += inv_s * (cov_s + mean_s * mean_s.transpose());
  }
  mix.cov -= mix.mean * mix.mean.transpose();
  return mix;
}

// ---------------------------------------------------------------------------
// Exhaustive-quadrature reference: E_theta[f(pi, theta)] moments by summing
// the dense predictive over every support point with its weight.
// ---------------------------------------------------------------------------

inline Mat stacked_queries(const Vec& pi, const aloq::EnvDistribution& env) {
  Mat Q(env.size(), pi.size() + env.dim());
  for (int j = 0; j < env.size(); ++j) {
    Q.row(j).head(pi.size()) = pi.transpose();
    Q.row(j).tail(env.dim()) = env.support.row(j);
  }
  return Q;
}

/// Fully independent path: dense predictions from raw data and samples.
inline aloq::MarginalEstimate bq_oracle_dense(const aloq::Dataset& data,
                                              const std::vector<aloq::HyperSample>& samples,
                                              const aloq::GpConfig& cfg,
                                              const aloq::EnvDistribution& env, const Vec& pi) {
  const Mat Q = stacked_queries(pi, env);
  double mean = 0.0, avg_var = 0.0, avg_sq = 0.0;
  for (const aloq::HyperSample& h : samples) {
    const DensePrediction p = dense_gp_predict(data, {h}, cfg, Q);
    const double mu = env.probs.dot(p.mean);
    const double var = env.probs.dot(p.cov * env.probs);
    mean += mu;
    avg_var += var;
    avg_sq += mu * mu;
  }
  const double S = static_cast<double>(samples.size());
  aloq::MarginalEstimate m;
  m.mean = mean / S;
  m.variance = std::max(avg_var / S + avg_sq / S - m.mean * m.mean, 0.0);
  return m;
}

/// Weighted sums over a fitted posterior's own predictive (keeps the fitted
/// return scaling, which matters for hypothetical-observation checks).
inline aloq::MarginalEstimate bq_oracle_post(const aloq::GpPosterior& post,
                                             const aloq::EnvDistribution& env, const Vec& pi) {
  const Mat Q = stacked_queries(pi, env);
  double mean = 0.0, avg_var = 0.0, avg_sq = 0.0;
  for (int s = 0; s < post.n_samples(); ++s) {
    const aloq::GpPosterior::Prediction p = post.predict_sample(Q, s);
    const double mu = env.probs.dot(p.mean);
    const double var = env.probs.dot(p.cov * env.probs);
    mean += mu;
    avg_var += var;
    avg_sq += mu * mu;
  }
  const double S = static_cast<double>(post.n_samples());
  aloq::MarginalEstimate m;
  m.mean = mean / S;
  m.variance = std::max(avg_var / S + avg_sq / S - m.mean * m.mean, 0.0);
  return m;
}

/// Fabricated-observation reference for the lookahead variance: copy the
/// posterior, append (pi, theta_cand) with an arbitrary made-up return, and
/// average each hyperparameter sample's marginal variance at pi by exhaustive
/// sums. The per-sample Gaussian variances never involve the observed returns,
/// so the result must not depend on the made-up value. (The mixture variance
/// would: its between-sample mean-dispersion term reads the returns, which is
/// why the selection score averages the per-sample variances instead.)
inline double lookahead_oracle(const aloq::GpPosterior& post, const aloq::EnvDistribution& env,
                               const Vec& pi, const Vec& theta_cand, double fabricated_y) {
  aloq::GpPosterior aug = post;
  aug.append(pi, theta_cand, fabricated_y);
  const Mat Q = stacked_queries(pi, env);
  double avg_var = 0.0;
  for (int s = 0; s < aug.n_samples(); ++s) {
    const aloq::GpPosterior::Prediction p = aug.predict_sample(Q, s);
    avg_var += env.probs.dot(p.cov * env.probs);
  }
  return avg_var / static_cast<double>(aug.n_samples());
}

// ---------------------------------------------------------------------------
// Forward kinematics by composing rotation matrices link by link (the library
// accumulates angles instead).
// ---------------------------------------------------------------------------

inline std::array<Eigen::Vector2d, 3> fk_oracle(const Vec& joints, const aloq::ArmGeometry& g) {
  Eigen::Matrix2d R = Eigen::Matrix2d::Identity();
  Eigen::Vector2d p = Eigen::Vector2d::Zero();
  std::array<Eigen::Vector2d, 3> out;
  for (int i = 0; i < 3; ++i) {
    R = R * Eigen::Rotation2Dd(g.angle(i, joints[i])).toRotationMatrix();
    p = p + R * Eigen::Vector2d(g.length[i], 0.0);
    out[i] = p;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo helpers.
// ---------------------------------------------------------------------------

/// Batch-means Monte Carlo standard error of the sample mean.
inline double mcse_batch_means(const std::vector<double>& x, int n_batches = 50) {
  const std::size_t n = x.size();
  if (n_batches < 2 || n < static_cast<std::size_t>(2 * n_batches))
    throw std::invalid_argument("mcse_batch_means: too few points");
  const std::size_t b = n / n_batches;
  std::vector<double> bm;
  for (int k = 0; k < n_batches; ++k) {
    double acc = 0.0;
    for (std::size_t i = k * b; i < (k + 1) * b; ++i) acc += x[i];
    bm.push_back(acc / static_cast<double>(b));
  }
  const double mean = std::accumulate(bm.begin(), bm.end(), 0.0) / n_batches;
  double var = 0.0;
  for (double v : bm) var += (v - mean) * (v - mean);
  var /= (n_batches - 1);
  return std::sqrt(var / n_batches);
}

/// Pearson chi-square statistic of equal-width bin counts on [0,1].
inline double chi_square_uniform(const std::vector<double>& x, int bins) {
  std::vector<int> count(bins, 0);
  for (double v : x) {
    int b = static_cast<int>(v * bins);
    b = std::min(std::max(b, 0), bins - 1);
    ++count[b];
  }
  const double expected = static_cast<double>(x.size()) / bins;
  double stat = 0.0;
  for (int c : count) stat += (c - expected) * (c - expected) / expected;
  return stat;
}

/// 0.999 quantile of the chi-square distribution with 19 degrees of freedom
/// (20 equal-width bins), i.e. a level-0.001 uniformity test threshold.
inline constexpr double kChiSq19At999 = 43.8202;

// ---------------------------------------------------------------------------
// Random problem generators (all driven by a caller-owned generator so every
// test is seeded and reproducible).
// ---------------------------------------------------------------------------

inline aloq::Dataset random_dataset(aloq::Rng& rng, int dpi, int dth, int n,
                                    double y_scale = 1.0, double y_shift = 0.0) {
  aloq::Dataset d(dpi, dth);
  for (int i = 0; i < n; ++i) {
    Vec p(dpi), e(dth);
    for (int k = 0; k < dpi; ++k) p[k] = aloq::uniform01(rng);
    for (int k = 0; k < dth; ++k) e[k] = aloq::uniform01(rng);
    d.append(p, e, y_shift + y_scale * (2.0 * aloq::uniform01(rng) - 1.0));
  }
  return d;
}

inline aloq::HyperSample random_hypers(aloq::Rng& rng, const aloq::GpConfig& cfg) {
  auto u = [&](double lo, double hi) { return lo + (hi - lo) * aloq::uniform01(rng); };
  aloq::HyperSample h;
  h.kernel.signal_var = u(0.5, 3.0);
  h.kernel.lengthscales = Vec(cfg.input_dim);
  for (int d = 0; d < cfg.input_dim; ++d) h.kernel.lengthscales[d] = u(0.2, 1.5);
  h.warp = aloq::WarpParams::identity(cfg.input_dim);
  if (cfg.warp_enabled)
    for (int d = 0; d < cfg.input_dim; ++d) {
      h.warp.alpha[d] = u(0.5, 2.5);
      h.warp.beta[d] = u(0.5, 2.5);
    }
  h.kernel.noise_var = u(1e-4, 1e-2) * h.kernel.signal_var;
  return h;
}

inline aloq::EnvDistribution random_env(aloq::Rng& rng, int dth, int n_support,
                                        bool uniform_weights) {
  Mat support(n_support, dth);
  for (int i = 0; i < n_support; ++i)
    for (int d = 0; d < dth; ++d) support(i, d) = aloq::uniform01(rng);
  Vec probs(n_support);
  if (uniform_weights) {
    probs.setConstant(1.0 / n_support);
  } else {
    double acc = 0.0;
    for (int i = 0; i < n_support; ++i) {
      probs[i] = 0.05 + aloq::uniform01(rng);
      acc += probs[i];
    }
    probs /= acc;
    probs[n_support - 1] = 1.0 - probs.head(n_support - 1).sum();
  }
  return aloq::EnvDistribution::discrete(std::move(support), std::move(probs));
}

/// Separable concave objective -sum_d w_d |x_d - c_d|^p_d with an interior
/// analytic maximizer.
struct SeparableConcave {
  Vec center, weight, power;
  double operator()(const Vec& x) const {
    double acc = 0.0;
    for (int d = 0; d < x.size(); ++d)
      acc -= weight[d] * std::pow(std::abs(x[d] - center[d]), power[d]);
    return acc;
  }
};

inline SeparableConcave random_concave(aloq::Rng& rng, int dim) {
  auto u = [&](double lo, double hi) { return lo + (hi - lo) * aloq::uniform01(rng); };
  SeparableConcave f;
  f.center = Vec(dim);
  f.weight = Vec(dim);
  f.power = Vec(dim);
  const double powers[3] = {1.5, 2.0, 4.0};
  for (int d = 0; d < dim; ++d) {
    f.center[d] = u(0.08, 0.92);
    f.weight[d] = u(0.5, 5.0);
    f.power[d] = powers[static_cast<int>(3.0 * aloq::uniform01(rng)) % 3];
  }
  return f;
}

// ---------------------------------------------------------------------------
// Exhaustive scan of the expected return over the 1-D policy box.
// ---------------------------------------------------------------------------

struct GridOptimum {
  double pi_natural = 0.0;
  double fbar = 0.0;
};

inline GridOptimum grid_argmax_fbar(const aloq::Task& task, int n_points = 4001) {
  if (task.policy_dim != 1) throw std::invalid_argument("grid_argmax_fbar: 1-D policies only");
  GridOptimum best;
  best.fbar = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_points; ++i) {
    const Vec u = Vec::Constant(1, static_cast<double>(i) / (n_points - 1));
    const double v = task.exact_fbar(u);
    if (v > best.fbar) {
      best.fbar = v;
      best.pi_natural = task.denormalize_policy(u)[0];
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Result-file comparison that ignores the wall-clock column (the last CSV
// field), which is the one legitimately clock-dependent output.
// ---------------------------------------------------------------------------

inline std::string strip_last_field(const std::string& line) {
  const std::size_t pos = line.rfind(',');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) lines.push_back(line);
  return lines;
}

inline bool same_csv_modulo_wall(const std::string& a, const std::string& b) {
  const auto la = read_lines(a), lb = read_lines(b);
  if (la.size() != lb.size()) return false;
  if (la.empty() || la[0] != lb[0]) return false;  // headers byte-identical
  for (std::size_t i = 1; i < la.size(); ++i)
    if (strip_last_field(la[i]) != strip_last_field(lb[i])) return false;
  return true;
}

inline std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace testsupport
