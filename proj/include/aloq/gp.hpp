#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "aloq/common.hpp"
#include "aloq/kernel.hpp"
#include "aloq/slice.hpp"
#include "aloq/stats.hpp"
#include "aloq/warp.hpp"

namespace aloq {

/// Log-normal hyperpriors. Warp priors differ per task family; everything else
/// is shared.
struct HyperPriors {
  double w0_mu = 0.0, w0_sigma = 1.0;
  double ls_mu = 0.0, ls_sigma = 0.75;
  double warp_mu = 0.0, warp_sigma = 0.5;
  double noise_mu = -4.0, noise_sigma = 1.0;
};

struct GpConfig {
  int input_dim = 0;
  bool warp_enabled = true;
  bool learn_noise = false;
  /// Observation noise pinned to this fraction of the signal variance when it
  /// is not a learned hyperparameter (deterministic simulators).
  double fixed_noise_ratio = 1e-6;
  /// Standardize returns before conditioning; predictions are mapped back.
  /// Off by default so the posterior equations hold verbatim in raw units.
  bool normalize_y = false;
  HyperPriors priors;

  int hyper_dim() const {
    return 1 + input_dim + (warp_enabled ? 2 * input_dim : 0) + (learn_noise ? 1 : 0);
  }

  void validate() const {
    if (input_dim <= 0) throw std::invalid_argument("GpConfig: input_dim must be positive");
    if (!(fixed_noise_ratio >= 0.0)) throw std::invalid_argument("GpConfig: bad noise ratio");
  }
};

/// One draw from the hyperparameter posterior.
struct HyperSample {
  KernelHyper kernel;
  WarpParams warp;
  double log_posterior = std::numeric_limits<double>::quiet_NaN();
};

/// Packs the positive hyperparameters into the log-space vector the slice
/// chain walks: [log w0, log w_1..D, (log a_1, log b_1, ..., log a_D, log b_D),
/// (log noise)].
inline Vec pack_log_hypers(const HyperSample& h, const GpConfig& cfg) {
  Vec v(cfg.hyper_dim());
  int k = 0;
  v[k++] = std::log(h.kernel.signal_var);
  for (int d = 0; d < cfg.input_dim; ++d) v[k++] = std::log(h.kernel.lengthscales[d]);
  if (cfg.warp_enabled)
    for (int d = 0; d < cfg.input_dim; ++d) {
      v[k++] = std::log(h.warp.alpha[d]);
      v[k++] = std::log(h.warp.beta[d]);
    }
  if (cfg.learn_noise) v[k++] = std::log(h.kernel.noise_var);
  return v;
}

inline HyperSample unpack_log_hypers(const Vec& v, const GpConfig& cfg) {
  if (v.size() != cfg.hyper_dim()) throw std::invalid_argument("unpack_log_hypers: bad size");
  HyperSample h;
  int k = 0;
  h.kernel.signal_var = std::exp(v[k++]);
  h.kernel.lengthscales.resize(cfg.input_dim);
  for (int d = 0; d < cfg.input_dim; ++d) h.kernel.lengthscales[d] = std::exp(v[k++]);
  h.warp = WarpParams::identity(cfg.input_dim);
  if (cfg.warp_enabled)
    for (int d = 0; d < cfg.input_dim; ++d) {
      h.warp.alpha[d] = std::exp(v[k++]);
      h.warp.beta[d] = std::exp(v[k++]);
    }
  h.kernel.noise_var = cfg.learn_noise ? std::exp(v[k++])
                                       : cfg.fixed_noise_ratio * h.kernel.signal_var;
  return h;
}

/// Prior medians, the deterministic chain initialization.
inline HyperSample prior_median_sample(const GpConfig& cfg) {
  HyperSample h;
  h.kernel.signal_var = std::exp(cfg.priors.w0_mu);
  h.kernel.lengthscales = Vec::Constant(cfg.input_dim, std::exp(cfg.priors.ls_mu));
  h.warp = WarpParams::identity(cfg.input_dim);
  if (cfg.warp_enabled) {
    h.warp.alpha.setConstant(std::exp(cfg.priors.warp_mu));
    h.warp.beta.setConstant(std::exp(cfg.priors.warp_mu));
  }
  h.kernel.noise_var = cfg.learn_noise ? std::exp(cfg.priors.noise_mu)
                                       : cfg.fixed_noise_ratio * h.kernel.signal_var;
  return h;
}

/// Slice step widths matched to the prior scales, in packed order.
inline Vec prior_step_widths(const GpConfig& cfg) {
  Vec w(cfg.hyper_dim());
  int k = 0;
  w[k++] = cfg.priors.w0_sigma;
  for (int d = 0; d < cfg.input_dim; ++d) w[k++] = cfg.priors.ls_sigma;
  if (cfg.warp_enabled)
    for (int d = 0; d < cfg.input_dim; ++d) {
      w[k++] = cfg.priors.warp_sigma;
      w[k++] = cfg.priors.warp_sigma;
    }
  if (cfg.learn_noise) w[k++] = cfg.priors.noise_sigma;
  return w;
}

namespace detail {

struct YScale {
  double mean = 0.0, sd = 1.0;
};

inline YScale y_scale(const Vec& y, bool normalize) {
  YScale s;
  if (!normalize || y.size() == 0) return s;
  s.mean = y.mean();
  if (y.size() > 1) {
    const double var = (y.array() - s.mean).square().sum() / static_cast<double>(y.size());
    s.sd = std::sqrt(var);
  }
  if (!(s.sd > 1e-12)) s.sd = 1.0;
  return s;
}

}  // namespace detail

/// Evaluates log p(hypers | data) = log marginal likelihood + log hyperpriors.
/// Reuses per-dimension warped squared-distance matrices across calls, so a
/// coordinate-wise sampler only pays for the dimension it moved.
class HyperEvaluator {
 public:
  HyperEvaluator(const Dataset& data, const GpConfig& cfg)
      : cfg_(cfg), X_(data.inputs()), dims_(cfg.input_dim) {
    cfg_.validate();
    if (data.input_dim() != cfg.input_dim)
      throw std::invalid_argument("HyperEvaluator: dataset dimension mismatch");
    const detail::YScale ys = detail::y_scale(data.values(), cfg.normalize_y);
    yz_ = (data.values().array() - ys.mean) / ys.sd;
    for (auto& c : dims_) c.key_a = c.key_b = std::numeric_limits<double>::quiet_NaN();
  }

  double log_prior(const HyperSample& h) const {
    const HyperPriors& p = cfg_.priors;
    double lp = lognormal_logpdf(h.kernel.signal_var, p.w0_mu, p.w0_sigma);
    for (int d = 0; d < cfg_.input_dim; ++d)
      lp += lognormal_logpdf(h.kernel.lengthscales[d], p.ls_mu, p.ls_sigma);
    if (cfg_.warp_enabled)
      for (int d = 0; d < cfg_.input_dim; ++d) {
        lp += lognormal_logpdf(h.warp.alpha[d], p.warp_mu, p.warp_sigma);
        lp += lognormal_logpdf(h.warp.beta[d], p.warp_mu, p.warp_sigma);
      }
    if (cfg_.learn_noise)
      lp += lognormal_logpdf(h.kernel.noise_var, p.noise_mu, p.noise_sigma);
    return lp;
  }

  double operator()(const HyperSample& h) {
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    if (!positive_finite(h)) return neg_inf;
    const double lp = log_prior(h);
    if (!std::isfinite(lp)) return neg_inf;

    const long l = X_.rows();
    if (l == 0) return lp;  // no data: posterior equals the prior

    Mat Q = Mat::Zero(l, l);
    for (int d = 0; d < cfg_.input_dim; ++d) {
      refresh_dim(d, h);
      const double ls = h.kernel.lengthscales[d];
      Q += dims_[d].sqdist / (ls * ls);
    }
    Mat K = (h.kernel.signal_var * (-0.5 * Q.array()).exp()).matrix();
    K.diagonal().array() += h.kernel.noise_var;

    Eigen::LLT<Mat> llt(K);
    if (llt.info() != Eigen::Success) return neg_inf;
    const Vec alpha = llt.solve(yz_);
    const double logdet_half = llt.matrixLLT().diagonal().array().log().sum();
    const double ll = -0.5 * yz_.dot(alpha) - logdet_half
                      - 0.5 * static_cast<double>(l) * std::log(2.0 * M_PI);
    if (!std::isfinite(ll)) return neg_inf;
    return ll + lp;
  }

 private:
  static bool positive_finite(const HyperSample& h) {
    if (!(h.kernel.signal_var > 0.0) || !std::isfinite(h.kernel.signal_var)) return false;
    for (int d = 0; d < h.kernel.lengthscales.size(); ++d)
      if (!(h.kernel.lengthscales[d] > 0.0) || !std::isfinite(h.kernel.lengthscales[d]))
        return false;
    if (!(h.kernel.noise_var >= 0.0) || !std::isfinite(h.kernel.noise_var)) return false;
    for (int d = 0; d < h.warp.alpha.size(); ++d) {
      if (!(h.warp.alpha[d] > 0.0) || !std::isfinite(h.warp.alpha[d])) return false;
      if (!(h.warp.beta[d] > 0.0) || !std::isfinite(h.warp.beta[d])) return false;
    }
    return true;
  }

  struct DimCache {
    double key_a, key_b;
    Mat sqdist;  // (warped_col_i - warped_col_j)^2
  };

  void refresh_dim(int d, const HyperSample& h) {
    const double a = cfg_.warp_enabled ? h.warp.alpha[d] : 1.0;
    const double b = cfg_.warp_enabled ? h.warp.beta[d] : 1.0;
    DimCache& c = dims_[d];
    if (c.key_a == a && c.key_b == b && c.sqdist.rows() == X_.rows()) return;
    Vec col;
    beta_warp_column(X_, d, a, b, col);
    const long l = X_.rows();
    c.sqdist.resize(l, l);
    for (long i = 0; i < l; ++i)
      for (long j = 0; j <= i; ++j) {
        const double z = col[i] - col[j];
        c.sqdist(i, j) = c.sqdist(j, i) = z * z;
      }
    c.key_a = a;
    c.key_b = b;
  }

  GpConfig cfg_;
  Mat X_;
  Vec yz_;
  std::vector<DimCache> dims_;
};

/// Reference entry point: one-shot evaluation of the log hyperposterior.
inline double log_hyperposterior(const Dataset& data, const HyperSample& h, const GpConfig& cfg) {
  HyperEvaluator ev(data, cfg);
  return ev(h);
}

/// Samples hyperparameters by slice sampling their log posterior in log space
/// (the Jacobian of the log transform is accounted for). An empty
/// initial_point starts from the prior medians; empty step widths default to
/// the prior sigmas.
inline std::vector<HyperSample> marginalize_hypers(const Dataset& data, const GpConfig& cfg,
                                                   ChainConfig chain) {
  cfg.validate();
  HyperEvaluator ev(data, cfg);
  if (chain.initial_point.size() == 0)
    chain.initial_point = pack_log_hypers(prior_median_sample(cfg), cfg);
  if (chain.step_widths.size() == 0) chain.step_widths = prior_step_widths(cfg);

  LogDensity target = [&](const Vec& v) -> double {
    const double lx = ev(unpack_log_hypers(v, cfg));
    return std::isfinite(lx) ? lx + v.sum() : lx;
  };
  const Mat rows = slice_sample(target, chain);

  std::vector<HyperSample> out;
  out.reserve(rows.rows());
  for (long s = 0; s < rows.rows(); ++s) {
    HyperSample h = unpack_log_hypers(rows.row(s).transpose(), cfg);
    h.log_posterior = ev(h);
    out.push_back(std::move(h));
  }
  return out;
}

/// Posterior over f given data and a set of hyperparameter samples. Caches a
/// Cholesky factor per sample; predictions mix the per-sample Gaussians
/// (mean of means, covariance of the mixture).
class GpPosterior {
 public:
  struct SampleState {
    HyperSample hyper;
    Mat Xw;       // warped training inputs
    Mat L;        // lower Cholesky of w0*C + (noise + jitter) I
    Vec alpha;    // (K + noise I)^{-1} y_z
    double jitter = 0.0;
  };

  struct Prediction {
    Vec mean;
    Mat cov;
  };

  GpPosterior() : data_(1, 0) {}

  static GpPosterior fit(const Dataset& data, std::vector<HyperSample> samples,
                         const GpConfig& cfg) {
    cfg.validate();
    if (samples.empty()) throw std::invalid_argument("GpPosterior::fit: no hyper samples");
    if (data.input_dim() != cfg.input_dim)
      throw std::invalid_argument("GpPosterior::fit: dataset dimension mismatch");
    GpPosterior g;
    g.data_ = data;
    g.cfg_ = cfg;
    const detail::YScale ys = detail::y_scale(data.values(), cfg.normalize_y);
    g.ym_ = ys.mean;
    g.ys_ = ys.sd;
    const Mat X = data.inputs();
    const Vec yz = (data.values().array() - g.ym_) / g.ys_;
    for (auto& h : samples) {
      h.kernel.validate();
      SampleState st;
      st.hyper = std::move(h);
      st.Xw = cfg.warp_enabled ? beta_warp_rows(X, st.hyper.warp) : X;
      factorize(st, yz);
      g.states_.push_back(std::move(st));
    }
    return g;
  }

  /// Adds one observation, updating every cached factor in O(l^2).
  void append(const Vec& policy, const Vec& env, double f) {
    data_.append(policy, env, f);
    Vec x(data_.input_dim());
    x << policy, env;
    const double fz = (f - ym_) / ys_;
    const Vec yz = (data_.values().array() - ym_) / ys_;
    for (auto& st : states_) {
      const Vec xw = cfg_.warp_enabled ? beta_warp(x, st.hyper.warp) : x;
      const long l = st.Xw.rows();
      Vec k(l);
      for (long i = 0; i < l; ++i)
        k[i] = se_kernel(st.Xw.row(i).transpose(), xw, st.hyper.kernel);
      const double kxx = st.hyper.kernel.signal_var + st.hyper.kernel.noise_var + st.jitter;

      st.Xw.conservativeResize(l + 1, Eigen::NoChange);
      st.Xw.row(l) = xw.transpose();

      Vec l21 = l > 0 ? st.L.template triangularView<Eigen::Lower>().solve(k).eval() : Vec(0);
      const double rem = kxx - l21.squaredNorm();
      if (rem > 1e-12 * st.hyper.kernel.signal_var) {
        st.L.conservativeResize(l + 1, l + 1);
        st.L.row(l).head(l) = l21.transpose();
        st.L.col(l).head(l).setZero();
        st.L(l, l) = std::sqrt(rem);
        solve_alpha(st, yz);
      } else {
        // The new point made the factor numerically rank deficient; rebuild
        // through the jitter ladder.
        factorize(st, yz);
      }
    }
  }

  Prediction predict(const Mat& queries) const {
    const long m = queries.rows();
    Prediction mix;
    mix.mean = Vec::Zero(m);
    mix.cov = Mat::Zero(m, m);
    const double s = 1.0 / static_cast<double>(states_.size());
    for (std::size_t i = 0; i < states_.size(); ++i) {
      Prediction p = predict_sample(queries, static_cast<int>(i));
      mix.mean += s * p.mean;
      mix.cov += s * (p.cov + p.mean * p.mean.transpose());
    }
    mix.cov -= mix.mean * mix.mean.transpose();
    return mix;
  }

  Prediction predict_sample(const Mat& queries, int s) const {
    const SampleState& st = states_.at(s);
    if (queries.cols() != cfg_.input_dim)
      throw std::invalid_argument("GpPosterior::predict: query dimension mismatch");
    const Mat Qw = cfg_.warp_enabled ? beta_warp_rows(queries, st.hyper.warp) : queries;
    const double w0 = st.hyper.kernel.signal_var;
    Prediction p;
    const long l = st.Xw.rows();
    Mat Kqq = w0 * se_corr_gram(Qw, st.hyper.kernel.lengthscales);
    if (l == 0) {
      p.mean = Vec::Constant(queries.rows(), ym_);
      p.cov = ys_ * ys_ * Kqq;
      return p;
    }
    Mat Ks = w0 * se_corr_cross(st.Xw, Qw, st.hyper.kernel.lengthscales);  // l x m
    Mat V = st.L.template triangularView<Eigen::Lower>().solve(Ks);
    p.mean = (ym_ + (ys_ * (Ks.transpose() * st.alpha)).array()).matrix();
    p.cov = ys_ * ys_ * (Kqq - V.transpose() * V);
    return p;
  }

  int n_samples() const { return static_cast<int>(states_.size()); }
  const HyperSample& sample(int s) const { return states_.at(s).hyper; }
  const SampleState& state(int s) const { return states_.at(s); }
  const Dataset& data() const { return data_; }
  const GpConfig& config() const { return cfg_; }
  double y_mean() const { return ym_; }
  double y_sd() const { return ys_; }

 private:
  static void solve_alpha(SampleState& st, const Vec& yz) {
    Vec tmp = st.L.template triangularView<Eigen::Lower>().solve(yz);
    st.alpha = st.L.template triangularView<Eigen::Lower>().transpose().solve(tmp);
  }

  /// Cholesky with an escalating jitter ladder: 0, then 1e-10*w0 growing
  /// tenfold up to 1e-4*w0. Beyond that the factorization is abandoned with a
  /// report of every attempt.
  static void factorize(SampleState& st, const Vec& yz) {
    const long l = st.Xw.rows();
    if (l == 0) {
      st.L.resize(0, 0);
      st.alpha.resize(0);
      st.jitter = 0.0;
      return;
    }
    const double w0 = st.hyper.kernel.signal_var;
    Mat K = w0 * se_corr_gram(st.Xw, st.hyper.kernel.lengthscales);
    K.diagonal().array() += st.hyper.kernel.noise_var;
    std::ostringstream attempts;
    double jitter = 0.0;
    for (int step = 0; step <= 7; ++step) {
      Mat Kj = K;
      Kj.diagonal().array() += jitter;
      Eigen::LLT<Mat> llt(Kj);
      if (llt.info() == Eigen::Success) {
        st.L = llt.matrixL();
        st.jitter = jitter;
        solve_alpha(st, yz);
        return;
      }
      attempts << (step ? ", " : "") << jitter;
      jitter = (step == 0) ? 1e-10 * w0 : jitter * 10.0;
    }
    throw std::runtime_error(
        "GpPosterior: Gram factorization failed; jitter ladder tried [" + attempts.str() +
        "] against signal variance " + std::to_string(w0));
  }

  Dataset data_;
  GpConfig cfg_;
  double ym_ = 0.0, ys_ = 1.0;
  std::vector<SampleState> states_;
};

}  // namespace aloq
