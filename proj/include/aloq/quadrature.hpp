#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

#include "aloq/common.hpp"
#include "aloq/gp.hpp"
#include "aloq/rng.hpp"

namespace aloq {

/// Distribution over environment variables, held as a weighted finite support
/// (continuous distributions are materialized once per run into a fixed
/// Monte Carlo sample set with uniform weights, so acquisition surfaces stay
/// stable within a run).
struct EnvDistribution {
  Mat support;  // N x d_theta, unit box
  Vec probs;    // nonnegative, sums to 1
  bool continuous = false;

  int size() const { return static_cast<int>(support.rows()); }
  int dim() const { return static_cast<int>(support.cols()); }

  static EnvDistribution discrete(Mat support, Vec probs) {
    EnvDistribution e;
    e.support = std::move(support);
    e.probs = std::move(probs);
    e.validate();
    return e;
  }

  /// Draws mc_count points from the generator and freezes them as an
  /// equal-weight support.
  static EnvDistribution continuous_mc(const std::function<Vec(Rng&)>& sampler, int mc_count,
                                       int dim, Rng& rng) {
    if (mc_count < 100)
      throw std::invalid_argument("EnvDistribution: continuous mc_count must be >= 100");
    EnvDistribution e;
    e.continuous = true;
    e.support.resize(mc_count, dim);
    for (int i = 0; i < mc_count; ++i) {
      Vec t = sampler(rng);
      if (t.size() != dim) throw std::invalid_argument("EnvDistribution: sampler dim mismatch");
      e.support.row(i) = t.transpose();
    }
    e.probs = Vec::Constant(mc_count, 1.0 / mc_count);
    e.validate();
    return e;
  }

  void validate() const {
    if (support.rows() == 0 || support.cols() == 0)
      throw std::invalid_argument("EnvDistribution: empty support");
    if (probs.size() != support.rows())
      throw std::invalid_argument("EnvDistribution: probs/support size mismatch");
    if ((probs.array() < 0.0).any())
      throw std::invalid_argument("EnvDistribution: negative probability");
    if (std::abs(probs.sum() - 1.0) > 1e-12)
      throw std::invalid_argument("EnvDistribution: probabilities must sum to 1");
    if ((support.array() < 0.0).any() || (support.array() > 1.0).any())
      throw std::invalid_argument("EnvDistribution: support outside the unit box");
  }

  /// Categorical draw by inverse CDF; one uniform per call, ties impossible.
  int sample_index(Rng& rng) const {
    const double u = uniform01(rng);
    double acc = 0.0;
    const int n = size();
    for (int i = 0; i < n; ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    return n - 1;
  }

  Vec sample(Rng& rng) const { return support.row(sample_index(rng)).transpose(); }
};

/// Gaussian belief over f_bar(pi) = E_theta[f(pi, theta)].
struct MarginalEstimate {
  double mean = 0.0;
  double variance = 0.0;
};

/// Marginalizes the GP over an environment distribution. The product form of
/// the SE kernel over (policy, env) blocks lets everything that does not
/// involve the query policy be cached per hyperparameter sample:
///   B    correlation between training env coordinates and the support,
///   c    = B p, the probability-weighted env correlation per training row,
///   Kp   = K_theta p over the support (for lookahead numerators),
///   qp   = w0 p' K_theta p, the prior variance of the quadrature estimate.
/// A query then costs O(l) for the mean and one O(l^2) triangular solve for
/// the variance.
class FbarEvaluator {
 public:
  FbarEvaluator(const GpPosterior& post, const EnvDistribution& env) : post_(&post), env_(env) {
    env_.validate();
    const int dpi = post.data().policy_dim();
    const int dth = post.data().env_dim();
    if (dth == 0) throw std::invalid_argument("FbarEvaluator: posterior has no env dimensions");
    if (env_.dim() != dth) throw std::invalid_argument("FbarEvaluator: env dimension mismatch");
    built_size_ = post.data().size();
    const bool warped = post.config().warp_enabled;
    caches_.resize(post.n_samples());
    for (int s = 0; s < post.n_samples(); ++s) {
      const auto& st = post.state(s);
      SampleCache& c = caches_[s];
      c.env_ls = st.hyper.kernel.lengthscales.tail(dth);
      c.Sw = env_.support;
      if (warped)
        for (int d = 0; d < dth; ++d) {
          Vec col;
          beta_warp_column(env_.support, d, st.hyper.warp.alpha[dpi + d],
                           st.hyper.warp.beta[dpi + d], col);
          c.Sw.col(d) = col;
        }
      const Mat Tw = st.Xw.rightCols(dth);
      c.B = se_corr_cross(Tw, c.Sw, c.env_ls);  // l x N
      c.c = c.B * env_.probs;
      const Mat Ktt = se_corr_gram(c.Sw, c.env_ls);
      c.Kp = Ktt * env_.probs;
      c.quad_prior = st.hyper.kernel.signal_var * env_.probs.dot(c.Kp);
    }
  }

  int n_samples() const { return post_->n_samples(); }
  int policy_dim() const { return post_->data().policy_dim(); }
  const EnvDistribution& env() const { return env_; }

  MarginalEstimate moments_sample(const Vec& pi, int s) const {
    PiState q = pi_state(pi, s);
    const double ys = post_->y_sd();
    MarginalEstimate m;
    m.mean = post_->y_mean() + ys * q.mean_z;
    m.variance = ys * ys * q.var_z;
    return m;
  }

  MarginalEstimate moments(const Vec& pi) const {
    const int S = n_samples();
    double mean = 0.0, avg_var = 0.0, avg_sq = 0.0;
    for (int s = 0; s < S; ++s) {
      MarginalEstimate m = moments_sample(pi, s);
      mean += m.mean;
      avg_var += m.variance;
      avg_sq += m.mean * m.mean;
    }
    mean /= S;
    MarginalEstimate m;
    m.mean = mean;
    m.variance = std::max(avg_var / S + avg_sq / S - mean * mean, 0.0);
    return m;
  }

  /// Variance of f_bar(pi) after hypothetically observing (pi, theta_cand).
  /// Depends only on kernel geometry, never on the unseen return.
  double lookahead_sample(const Vec& pi, const Vec& theta_cand, int s) const {
    const auto& st = post_->state(s);
    const SampleCache& c = caches_[s];
    PiState q = pi_state(pi, s);

    Vec tw = warp_env(theta_cand, s);
    const long l = st.Xw.rows();
    const double w0 = st.hyper.kernel.signal_var;

    // correlation of the candidate's env coordinate with support and train
    double wc = 0.0;
    {
      Vec d = Vec::Zero(c.Sw.rows());
      for (int j = 0; j < c.Sw.cols(); ++j)
        d += ((c.Sw.col(j).array() - tw[j]) / c.env_ls[j]).square().matrix();
      wc = env_.probs.dot((-0.5 * d.array()).exp().matrix());
    }
    Vec kplus(l);
    if (l > 0) {
      Vec d = Vec::Zero(l);
      const Mat TwTrain = st.Xw.rightCols(env_.dim());
      for (int j = 0; j < env_.dim(); ++j)
        d += ((TwTrain.col(j).array() - tw[j]) / c.env_ls[j]).square().matrix();
      kplus = w0 * (q.api.array() * (-0.5 * d.array()).exp()).matrix();
    }
    Vec g = l > 0 ? st.L.template triangularView<Eigen::Lower>().solve(kplus).eval() : Vec(0);

    const double var_plus = w0 - g.squaredNorm();
    const double denom = var_plus + st.hyper.kernel.noise_var;
    const double cov_bar = w0 * wc - q.z.dot(g);
    const double reduction = denom > 1e-300 ? cov_bar * cov_bar / denom : 0.0;
    const double ys2 = post_->y_sd() * post_->y_sd();
    return ys2 * std::max(q.var_z - reduction, 0.0);
  }

  double lookahead(const Vec& pi, const Vec& theta_cand) const {
    double acc = 0.0;
    for (int s = 0; s < n_samples(); ++s) acc += lookahead_sample(pi, theta_cand, s);
    return acc / n_samples();
  }

  /// Exhaustive argmin of the lookahead variance over the support; ties break
  /// to the lowest index. Batched: one l x N triangular solve per sample.
  int select_theta_index(const Vec& pi) const {
    const int N = env_.size();
    Vec score = Vec::Zero(N);
    for (int s = 0; s < n_samples(); ++s) {
      const auto& st = post_->state(s);
      const SampleCache& c = caches_[s];
      PiState q = pi_state(pi, s);
      const double w0 = st.hyper.kernel.signal_var;
      const long l = st.Xw.rows();
      Vec cov_bar, var_plus;
      if (l > 0) {
        Mat Kplus = w0 * (c.B.array().colwise() * q.api.array()).matrix();  // l x N
        Mat G = st.L.template triangularView<Eigen::Lower>().solve(Kplus);
        cov_bar = (w0 * c.Kp - G.transpose() * q.z).eval();
        var_plus = (w0 - G.colwise().squaredNorm().transpose().array()).matrix();
      } else {
        cov_bar = w0 * c.Kp;
        var_plus = Vec::Constant(N, w0);
      }
      const double ys2 = post_->y_sd() * post_->y_sd();
      for (int i = 0; i < N; ++i) {
        const double denom = var_plus[i] + st.hyper.kernel.noise_var;
        const double red = denom > 1e-300 ? cov_bar[i] * cov_bar[i] / denom : 0.0;
        score[i] += ys2 * std::max(q.var_z - red, 0.0);
      }
    }
    int best = 0;
    for (int i = 1; i < N; ++i)
      if (score[i] < score[best]) best = i;
    return best;
  }

  /// Argmax of the predictive variance of f(pi, theta) over the support
  /// (uncertainty-sampling baseline); ties break to the lowest index.
  int uncertainty_theta_index(const Vec& pi) const {
    const int N = env_.size();
    Mat Q(N, post_->data().input_dim());
    for (int i = 0; i < N; ++i) {
      Q.row(i).head(pi.size()) = pi.transpose();
      Q.row(i).tail(env_.dim()) = env_.support.row(i);
    }
    const Vec v = post_->predict(Q).cov.diagonal();
    int best = 0;
    for (int i = 1; i < N; ++i)
      if (v[i] > v[best]) best = i;
    return best;
  }

  /// Detects use after the posterior grew; callers rebuild the evaluator
  /// after appending observations.
  bool stale() const { return post_->data().size() != built_size_; }

 private:
  struct SampleCache {
    Mat Sw;       // warped support
    Vec env_ls;   // env-block lengthscales
    Mat B;        // train-env vs support correlation
    Vec c;        // B * probs
    Vec Kp;       // K_theta * probs over support
    double quad_prior = 0.0;
  };

  struct PiState {
    Vec api;      // policy correlation with training rows
    Vec z;        // L^{-1} (w0 * api .* c)
    double mean_z = 0.0, var_z = 0.0;
  };

  Vec warp_env(const Vec& theta, int s) const {
    if (theta.size() != env_.dim())
      throw std::invalid_argument("FbarEvaluator: theta dimension mismatch");
    if (!post_->config().warp_enabled) return theta;
    const auto& w = post_->state(s).hyper.warp;
    const int dpi = post_->data().policy_dim();
    Vec out(theta.size());
    for (int d = 0; d < theta.size(); ++d)
      out[d] = beta_cdf(theta[d], w.alpha[dpi + d], w.beta[dpi + d]);
    return out;
  }

  Vec warp_policy(const Vec& pi, int s) const {
    if (pi.size() != post_->data().policy_dim())
      throw std::invalid_argument("FbarEvaluator: pi dimension mismatch");
    if (!post_->config().warp_enabled) return pi;
    const auto& w = post_->state(s).hyper.warp;
    Vec out(pi.size());
    for (int d = 0; d < pi.size(); ++d) out[d] = beta_cdf(pi[d], w.alpha[d], w.beta[d]);
    return out;
  }

  PiState pi_state(const Vec& pi, int s) const {
    if (stale())
      throw std::logic_error("FbarEvaluator: posterior changed since construction");
    const auto& st = post_->state(s);
    const SampleCache& c = caches_[s];
    const double w0 = st.hyper.kernel.signal_var;
    const long l = st.Xw.rows();
    PiState q;
    const Vec pw = warp_policy(pi, s);
    const int dpi = post_->data().policy_dim();
    if (l > 0) {
      Vec d = Vec::Zero(l);
      const Mat Pw = st.Xw.leftCols(dpi);
      for (int j = 0; j < dpi; ++j)
        d += ((Pw.col(j).array() - pw[j]) / st.hyper.kernel.lengthscales[j]).square().matrix();
      q.api = (-0.5 * d.array()).exp().matrix();
      const Vec u = w0 * (q.api.array() * c.c.array()).matrix();
      q.mean_z = u.dot(st.alpha);
      q.z = st.L.template triangularView<Eigen::Lower>().solve(u);
      q.var_z = std::max(c.quad_prior - q.z.squaredNorm(), 0.0);
    } else {
      q.api.resize(0);
      q.z.resize(0);
      q.mean_z = 0.0;
      q.var_z = c.quad_prior;
    }
    return q;
  }

  const GpPosterior* post_;
  EnvDistribution env_;
  long built_size_ = 0;
  std::vector<SampleCache> caches_;
};

inline MarginalEstimate fbar_moments(const Vec& pi, const GpPosterior& post,
                                     const EnvDistribution& env) {
  return FbarEvaluator(post, env).moments(pi);
}

inline double lookahead_variance(const Vec& pi, const Vec& theta_cand, const GpPosterior& post,
                                 const EnvDistribution& env) {
  return FbarEvaluator(post, env).lookahead(pi, theta_cand);
}

inline Vec select_theta(const Vec& pi, const GpPosterior& post, const EnvDistribution& env) {
  FbarEvaluator ev(post, env);
  return env.support.row(ev.select_theta_index(pi)).transpose();
}

inline Vec uncertainty_sampling_theta(const Vec& pi, const GpPosterior& post,
                                      const EnvDistribution& env) {
  FbarEvaluator ev(post, env);
  return env.support.row(ev.uncertainty_theta_index(pi)).transpose();
}

}  // namespace aloq
