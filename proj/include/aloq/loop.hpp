#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "aloq/acquisition.hpp"
#include "aloq/common.hpp"
#include "aloq/gp.hpp"
#include "aloq/quadrature.hpp"
#include "aloq/rng.hpp"
#include "aloq/slice.hpp"
#include "aloq/tasks.hpp"

namespace aloq {

enum class Variant { kAloq, kRqAloq, kUnwarped, kOneStep, kNaive };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kAloq: return "aloq";
    case Variant::kRqAloq: return "rq-aloq";
    case Variant::kUnwarped: return "unwarped";
    case Variant::kOneStep: return "one-step";
    case Variant::kNaive: return "naive";
  }
  throw std::logic_error("variant_name: unknown variant");
}

inline Variant variant_from_name(const std::string& s) {
  if (s == "aloq") return Variant::kAloq;
  if (s == "rq-aloq") return Variant::kRqAloq;
  if (s == "unwarped") return Variant::kUnwarped;
  if (s == "one-step") return Variant::kOneStep;
  if (s == "naive") return Variant::kNaive;
  throw std::invalid_argument("unknown variant '" + s +
                              "' (expected aloq, rq-aloq, unwarped, one-step, naive)");
}

enum class Phase { kInit, kExplore, kIntensify };

inline const char* phase_name(Phase p) {
  switch (p) {
    case Phase::kInit: return "init";
    case Phase::kExplore: return "explore";
    case Phase::kIntensify: return "intensify";
  }
  throw std::logic_error("phase_name: unknown phase");
}

struct RunConfig {
  int total_calls = 200;  // simulator-call budget L
  int init_design = 0;    // initial-design size; 0 selects 4 * (d_pi + d_theta)
  std::uint64_t seed = 0;
  Variant variant = Variant::kAloq;
  double kappa = std::numeric_limits<double>::quiet_NaN();  // NaN: task default
  int direct_budget = 500;
  double direct_tol = 1e-4;
  int hyper_samples = 10;
  int burn_in_first = 50;   // burn-in of the first hyperparameter chain
  // Burn-in when warm-starting from the previous state. Kept equal to the
  // cold burn-in: the hyperposterior drifts sharply when the first rare-event
  // returns arrive, and a short rewarm lets the chain lag that drift, which
  // collapses the hyperparameter mixture to a near point mass and produces
  // overconfident posteriors.
  int burn_in_rewarm = 50;
  int thinning = 5;
  // Hyperparameters are re-sampled every iteration while the dataset has at
  // most full_refresh_rows rows, then every refresh_stride-th iteration;
  // between refreshes new observations enter through incremental factor
  // updates. Pure wall-clock amortization for large runs on one core.
  int full_refresh_rows = 200;
  int refresh_stride = 3;

  int resolved_init_design(const Task& task) const {
    return init_design > 0 ? init_design : 4 * (task.policy_dim + task.env_dim);
  }

  void validate() const {
    if (total_calls < 2) throw std::invalid_argument("RunConfig: total_calls must be >= 2");
    if (init_design < 0) throw std::invalid_argument("RunConfig: negative init_design");
    if (!(kappa >= 0.0) && !std::isnan(kappa))
      throw std::invalid_argument("RunConfig: kappa must be >= 0 or NaN (task default)");
    if (direct_budget < 1) throw std::invalid_argument("RunConfig: direct_budget must be >= 1");
    if (hyper_samples < 1) throw std::invalid_argument("RunConfig: hyper_samples must be >= 1");
    if (burn_in_first < 0 || burn_in_rewarm < 0 || thinning < 0)
      throw std::invalid_argument("RunConfig: negative chain schedule");
    if (full_refresh_rows < 0 || refresh_stride < 1)
      throw std::invalid_argument("RunConfig: bad refresh schedule");
  }
};

struct CallRecord {
  int call = 0;  // 1-based simulator-call index
  Phase phase = Phase::kInit;
  Vec pi, theta;   // normalized coordinates as passed to the simulator
  double f = 0.0;  // observed return, natural units (incl. observation noise)
  // Recommendation if stopped after this call, and the model's estimate of
  // its expected return in natural units. During the initial design (before
  // any model exists) the recommendation falls back to the best raw return.
  Vec incumbent;
  double incumbent_fbar = 0.0;
  double wall_ms = 0.0;  // wall-clock time spent producing this call
};

struct Trace {
  std::vector<CallRecord> calls;
  Vec final_policy;         // recommended policy after the full budget
  double final_fbar = 0.0;  // model estimate for final_policy, natural units
  int iterations = 0;
  std::vector<std::string> warnings;
};

namespace detail {

inline Mat latin_hypercube(int n, int dim, Rng rng) {
  Mat X(n, dim);
  std::vector<int> perm(n);
  for (int d = 0; d < dim; ++d) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int i = 0; i < n; ++i) X(i, d) = (perm[i] + uniform01(rng)) / n;
  }
  return X;
}

class Runner {
 public:
  Runner(const Task& task, const RunConfig& cfg)
      : task_(task),
        cfg_(cfg),
        kappa_(std::isnan(cfg.kappa) ? task.default_kappa : cfg.kappa),
        data_(task.policy_dim, uses_env_input() ? task.env_dim : 0),
        env_init_rng_(substream(cfg.seed, 11)),
        opt_env_rng_(substream(cfg.seed, 13)),
        noise_rng_(substream(cfg.seed, 15)) {
    cfg_.validate();
    if (!task_.evaluate) throw std::invalid_argument("Runner: task has no simulator");
    acq_.kappa = kappa_;
    acq_.direct_budget = cfg_.direct_budget;
    acq_.direct_tol = cfg_.direct_tol;

    gp_cfg_.input_dim = task_.policy_dim + (uses_env_input() ? task_.env_dim : 0);
    gp_cfg_.warp_enabled = cfg_.variant != Variant::kUnwarped && cfg_.variant != Variant::kNaive;
    gp_cfg_.learn_noise = task_.obs_noise_sd > 0.0 || cfg_.variant == Variant::kNaive;
    gp_cfg_.normalize_y = true;
    gp_cfg_.priors.warp_mu = task_.warp_prior_mu;
    if (cfg_.variant == Variant::kNaive) {
      // Env variation shows up as observation noise of the policy-only model,
      // so the noise hyperprior must admit O(1) noise rather than jitter.
      gp_cfg_.priors.noise_mu = 0.0;
      gp_cfg_.priors.noise_sigma = 1.0;
    }
  }

  Trace run() {
    const int l0 = cfg_.resolved_init_design(task_);
    const int total = cfg_.total_calls;
    if (total <= l0)
      throw std::invalid_argument("RunConfig: total_calls must exceed the initial design (" +
                                  std::to_string(l0) + ")");
    if (l0 < 2) throw std::invalid_argument("RunConfig: initial design must have >= 2 points");
    if (two_calls() && (total - l0) % 2 != 0)
      throw std::invalid_argument(
          "RunConfig: this variant makes two simulator calls per iteration; total_calls minus "
          "the initial design must be even");

    Trace trace;
    trace.warnings = task_.warnings;

    // Initial design: Latin-hypercube policies, environment draws from p(theta).
    const Mat lhs = latin_hypercube(l0, task_.policy_dim, substream(cfg_.seed, 10));
    for (int i = 0; i < l0; ++i) {
      const auto t0 = now();
      CallRecord rec;
      rec.call = i + 1;
      rec.phase = Phase::kInit;
      rec.pi = lhs.row(i).transpose();
      rec.theta = task_.env.sample(env_init_rng_);
      rec.f = simulate(rec.pi, rec.theta);
      absorb(rec.pi, rec.theta, rec.f);
      trace.calls.push_back(std::move(rec));
      // No model yet: recommend the best raw return so far, ties to earliest.
      int best = 0;
      for (int j = 1; j <= i; ++j)
        if (task_.sense * trace.calls[j].f > task_.sense * trace.calls[best].f) best = j;
      trace.calls.back().incumbent = trace.calls[best].pi;
      trace.calls.back().incumbent_fbar = trace.calls[best].f;
      trace.calls.back().wall_ms = ms_since(t0);
    }

    const int iterations = two_calls() ? (total - l0) / 2 : (total - l0);
    trace.iterations = iterations;

    for (int iter = 1; iter <= iterations; ++iter) {
      // Explore call: refresh the hyperposterior if due, maximize the
      // acquisition over policies, pick theta, run the simulator.
      auto t0 = now();
      maybe_refresh();
      const Vec pi_n = acquisition_argmax();
      const Vec theta_n = choose_theta(pi_n);
      const double f_n = simulate(pi_n, theta_n);
      absorb(pi_n, theta_n, f_n);
      auto [inc_pi, inc_fbar] = incumbent();
      CallRecord explore;
      explore.call = static_cast<int>(trace.calls.size()) + 1;
      explore.phase = Phase::kExplore;
      explore.pi = pi_n;
      explore.theta = theta_n;
      explore.f = f_n;
      explore.incumbent = inc_pi;
      explore.incumbent_fbar = inc_fbar;
      explore.wall_ms = ms_since(t0);
      trace.calls.push_back(std::move(explore));

      if (two_calls()) {
        // Intensify call: re-evaluate the incumbent at its most informative
        // environment setting.
        t0 = now();
        const Vec theta_star = choose_theta(inc_pi);
        const double f_star = simulate(inc_pi, theta_star);
        absorb(inc_pi, theta_star, f_star);
        CallRecord intensify;
        intensify.call = static_cast<int>(trace.calls.size()) + 1;
        intensify.phase = Phase::kIntensify;
        intensify.pi = inc_pi;
        intensify.theta = theta_star;
        intensify.f = f_star;
        intensify.incumbent = inc_pi;
        intensify.incumbent_fbar = inc_fbar;
        intensify.wall_ms = ms_since(t0);
        trace.calls.push_back(std::move(intensify));
      }
    }

    // Final recommendation: refresh the hyperposterior against the complete
    // dataset, then take the posterior-mean argmax over observed policies.
    const auto t0 = now();
    refresh();
    auto [final_pi, final_fbar] = incumbent();
    trace.final_policy = final_pi;
    trace.final_fbar = final_fbar;
    trace.calls.back().incumbent = final_pi;
    trace.calls.back().incumbent_fbar = final_fbar;
    trace.calls.back().wall_ms += ms_since(t0);
    return trace;
  }

 private:
  using Clock = std::chrono::steady_clock;
  static Clock::time_point now() { return Clock::now(); }
  static double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(now() - t0).count();
  }

  bool naive() const { return cfg_.variant == Variant::kNaive; }
  bool uses_env_input() const { return !naive(); }
  bool two_calls() const {
    return cfg_.variant == Variant::kAloq || cfg_.variant == Variant::kRqAloq ||
           cfg_.variant == Variant::kUnwarped;
  }
  bool active_theta() const {
    return cfg_.variant == Variant::kAloq || cfg_.variant == Variant::kUnwarped ||
           cfg_.variant == Variant::kOneStep;
  }

  double simulate(const Vec& pi, const Vec& theta) {
    double f = task_.evaluate(pi, theta);
    if (task_.obs_noise_sd > 0.0) f += task_.obs_noise_sd * normal01(noise_rng_);
    return f;
  }

  /// Stores an observation (model values are sense-corrected so the loop
  /// always maximizes) and keeps the fitted state in sync.
  void absorb(const Vec& pi, const Vec& theta, double f) {
    const Vec env_in = uses_env_input() ? theta : Vec(0);
    const double g = task_.sense * f;
    data_.append(pi, env_in, g);
    if (fitted_) {
      post_.append(pi, env_in, g);
      rebuild_fbar();
    }
    bool seen = false;
    for (const Vec& p : observed_)
      if (p.size() == pi.size() && (p.array() == pi.array()).all()) {
        seen = true;
        break;
      }
    if (!seen) observed_.push_back(pi);
  }

  void maybe_refresh() {
    if (!fitted_ || data_.size() <= cfg_.full_refresh_rows ||
        iterations_since_refresh_ + 1 >= cfg_.refresh_stride) {
      refresh();
    } else {
      ++iterations_since_refresh_;
    }
  }

  void refresh() {
    ChainConfig cc;
    cc.seed = substream_seed(cfg_.seed, 1000 + static_cast<std::uint64_t>(refresh_count_));
    cc.n_samples = cfg_.hyper_samples;
    cc.thinning = cfg_.thinning;
    if (warm_state_.size() == 0) {
      cc.burn_in = cfg_.burn_in_first;
    } else {
      cc.burn_in = cfg_.burn_in_rewarm;
      cc.initial_point = warm_state_;
    }
    std::vector<HyperSample> samples = marginalize_hypers(data_, gp_cfg_, cc);
    warm_state_ = pack_log_hypers(samples.back(), gp_cfg_);
    post_ = GpPosterior::fit(data_, std::move(samples), gp_cfg_);
    fitted_ = true;
    rebuild_fbar();
    ++refresh_count_;
    iterations_since_refresh_ = 0;
  }

  void rebuild_fbar() {
    if (uses_env_input()) fbar_ = std::make_unique<FbarEvaluator>(post_, task_.env);
  }

  Vec acquisition_argmax() {
    if (!naive()) return maximize_alpha_aloq(*fbar_, kappa_, acq_).argmax;
    const auto ucb = [&](const Vec& pi) {
      Mat q(1, pi.size());
      q.row(0) = pi.transpose();
      const GpPosterior::Prediction p = post_.predict(q);
      return p.mean[0] + kappa_ * std::sqrt(std::max(0.0, p.cov(0, 0)));
    };
    return direct_maximize(ucb, task_.policy_dim, acq_.direct()).argmax;
  }

  Vec choose_theta(const Vec& pi) {
    if (active_theta())
      return task_.env.support.row(fbar_->select_theta_index(pi)).transpose();
    return task_.env.sample(opt_env_rng_);
  }

  /// Best observed policy by posterior mean of the expected return, ties to
  /// the earliest; returns (policy, estimate in natural units).
  std::pair<Vec, double> incumbent() const {
    if (observed_.empty()) throw std::logic_error("incumbent: no observations");
    if (naive()) {
      Mat q(static_cast<int>(observed_.size()), task_.policy_dim);
      for (int i = 0; i < q.rows(); ++i) q.row(i) = observed_[i].transpose();
      const Vec mean = post_.predict(q).mean;
      int best = 0;
      for (int i = 1; i < mean.size(); ++i)
        if (mean[i] > mean[best]) best = i;
      return {observed_[best], task_.sense * mean[best]};
    }
    int best = 0;
    double best_mean = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(observed_.size()); ++i) {
      const double m = fbar_->moments(observed_[i]).mean;
      if (m > best_mean) {
        best_mean = m;
        best = i;
      }
    }
    return {observed_[best], task_.sense * best_mean};
  }

  const Task& task_;
  RunConfig cfg_;
  double kappa_;
  AcquisitionConfig acq_;
  GpConfig gp_cfg_;
  Dataset data_;
  GpPosterior post_;
  std::unique_ptr<FbarEvaluator> fbar_;
  std::vector<Vec> observed_;
  Vec warm_state_;
  bool fitted_ = false;
  int refresh_count_ = 0;
  int iterations_since_refresh_ = 0;
  Rng env_init_rng_, opt_env_rng_, noise_rng_;
};

}  // namespace detail

inline Trace run_variant(const Task& task, const RunConfig& cfg) {
  return detail::Runner(task, cfg).run();
}

inline Trace run_aloq(const Task& task, RunConfig cfg) {
  cfg.variant = Variant::kAloq;
  return run_variant(task, cfg);
}

inline Trace run_rq_aloq(const Task& task, RunConfig cfg) {
  cfg.variant = Variant::kRqAloq;
  return run_variant(task, cfg);
}

inline Trace run_unwarped(const Task& task, RunConfig cfg) {
  cfg.variant = Variant::kUnwarped;
  return run_variant(task, cfg);
}

inline Trace run_one_step(const Task& task, RunConfig cfg) {
  cfg.variant = Variant::kOneStep;
  return run_variant(task, cfg);
}

inline Trace run_naive(const Task& task, RunConfig cfg) {
  cfg.variant = Variant::kNaive;
  return run_variant(task, cfg);
}

}  // namespace aloq
