#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "aloq/arm.hpp"
#include "aloq/common.hpp"
#include "aloq/quadrature.hpp"
#include "aloq/rng.hpp"
#include "aloq/slice.hpp"

namespace aloq {

/// A benchmark problem: a deterministic simulator f(pi, theta) together with
/// the environment distribution the expectation is taken over. Policies and
/// environment variables cross the interface in normalized unit-box
/// coordinates; `evaluate` converts to natural units internally. `sense` is
/// +1 when larger f is better, -1 for costs.
struct Task {
  std::string name;
  int policy_dim = 0;
  int env_dim = 0;
  Vec pi_lo, pi_hi;            // natural policy box mapped onto [0,1]^policy_dim
  EnvDistribution env;         // quadrature support, normalized coordinates
  double sense = 1.0;
  double default_kappa = 1.5;  // exploration weight suited to the task family
  double warp_prior_mu = 0.0;  // log-space location of the warp-shape hyperprior
  double obs_noise_sd = 0.0;   // >0: simulator returns carry Gaussian noise
  std::function<double(const Vec&, const Vec&)> evaluate;  // normalized (pi, theta)
  std::function<double(const Vec&)> exact_fbar;  // expected f, natural units
  std::function<double(const Vec&)> sre_prob;    // exact rare-event probability
  std::vector<std::string> warnings;             // construction-time diagnostics

  Vec denormalize_policy(const Vec& u) const {
    return pi_lo.array() + u.array() * (pi_hi.array() - pi_lo.array());
  }
};

namespace detail {

/// Validates that theta lies on the grid lo + step*k, k = 0..count-1, and
/// throws otherwise; the synthetic rare-event functions are defined only on
/// their discrete environment supports.
inline void require_on_grid(double theta, double lo, double step, int count, const char* fn) {
  const double k = (theta - lo) / step;
  const double r = std::round(k);
  if (std::abs(k - r) > 1e-6 || r < -0.5 || r > count - 0.5)
    throw std::invalid_argument(std::string(fn) + ": theta " + std::to_string(theta) +
                                " is not on the environment support grid");
}

inline void require_policy_range(double pi, const char* fn) {
  if (!(pi >= -2.0 - 1e-9 && pi <= 2.0 + 1e-9))
    throw std::invalid_argument(std::string(fn) + ": pi " + std::to_string(pi) +
                                " outside [-2, 2]");
}

}  // namespace detail

/// Synthetic rare-event benchmark 1 (natural units). A narrow high-value
/// Gaussian spike rides on a low-amplitude sinusoid; the spike is active only
/// for environment values near -0.5, which carry little probability mass.
inline double fsre1(double pi, double theta) {
  detail::require_policy_range(pi, "fsre1");
  detail::require_on_grid(theta, -1.0, 0.05, 111, "fsre1");
  const double spike = 75.0 * pi * std::exp(-pi * pi - (4.0 * theta + 2.0) * (4.0 * theta + 2.0));
  return spike + std::sin(2.0 * pi) * std::sin(2.7 * theta);
}

/// Synthetic rare-event benchmark 2 (natural units). The third term is a
/// large bonus/penalty ridge active only on the rare band |theta| < 0.2.
inline double fsre2(double pi, double theta) {
  detail::require_policy_range(pi, "fsre2");
  detail::require_on_grid(theta, -1.0, 0.02, 101, "fsre2");
  const double band = 0.2 - std::min(0.2, std::abs(theta));
  return std::sin(pi) * std::sin(pi) + 2.0 * std::cos(theta) + 200.0 * std::cos(2.0 * pi) * band;
}

namespace detail {

inline Task make_fsre_task(std::string name, double theta_lo, double theta_step, int count,
                           const std::function<double(int)>& raw_mass,
                           double (*fn)(double, double)) {
  Task t;
  t.name = std::move(name);
  t.policy_dim = 1;
  t.env_dim = 1;
  t.pi_lo = Vec::Constant(1, -2.0);
  t.pi_hi = Vec::Constant(1, 2.0);
  t.sense = 1.0;
  t.default_kappa = 3.0;
  t.warp_prior_mu = 2.0;

  Mat support(count, 1);
  Vec probs(count);
  const double span = theta_step * (count - 1);
  for (int k = 0; k < count; ++k) {
    support(k, 0) = static_cast<double>(k) / (count - 1);
    probs[k] = raw_mass(k);
  }
  probs /= probs.sum();  // stated masses are renormalized to a distribution
  t.env = EnvDistribution::discrete(std::move(support), std::move(probs));

  auto to_theta = [theta_lo, span](double u) { return theta_lo + span * u; };
  t.evaluate = [fn, to_theta](const Vec& pi_u, const Vec& th_u) {
    return fn(4.0 * pi_u[0] - 2.0, to_theta(th_u[0]));
  };
  const EnvDistribution env = t.env;
  t.exact_fbar = [fn, to_theta, env](const Vec& pi_u) {
    const double pi = 4.0 * pi_u[0] - 2.0;
    double acc = 0.0;
    for (int k = 0; k < env.size(); ++k) acc += env.probs[k] * fn(pi, to_theta(env.support(k, 0)));
    return acc;
  };
  return t;
}

}  // namespace detail

/// Benchmark task over fsre1: maximize the expected value under a 111-point
/// support on [-1, 4.5] where the spike-activating region is rare (0.47% per
/// point against 1% elsewhere).
inline Task fsre1_task() {
  return detail::make_fsre_task(
      "fsre1", -1.0, 0.05, 111, [](int k) { return k <= 20 ? 0.0047 : 0.0100; }, &fsre1);
}

/// Benchmark task over fsre2: maximize the expected value under a 101-point
/// support on [-1, 1] whose central band |theta| <= 0.2 is rare (0.2% per
/// point against 1.2% elsewhere).
inline Task fsre2_task() {
  return detail::make_fsre_task(
      "fsre2", -1.0, 0.02, 101,
      [](int k) { return (k >= 40 && k <= 60) ? 0.0020 : 0.0120; }, &fsre2);
}

namespace arm_detail {

constexpr double kDistanceScale = 100.0;  // cost per unit tip-to-target distance
constexpr double kSrePenalty = 150.0;     // cost charged when the rare event fires

// Collision walls: 20 vertical planes with x-positions log-spaced over
// [-0.2, 0.14), denser near the arm. Normalized coordinates come out as
// u_j = 1 - 0.8^j exactly.
constexpr int kWallCount = 20;
constexpr double kWallLow = -0.2;
constexpr double kWallSpan = 0.34;
constexpr double kWallDecay = 0.8;
constexpr double kWallMassDecay = 0.45;  // nearer (riskier) walls are rarer
constexpr double kCollisionMass = 0.12;  // total mass of walls that hit the reference policy

constexpr double kBreakBandLo = 0.3;  // first-joint band with breakage exposure
constexpr double kBreakBandHi = 0.7;
constexpr double kBreakProb = 0.05;
constexpr int kBreakMcCount = 200;

constexpr double kTorqueLo = 0.5;  // torque multiplier range theta is drawn from
constexpr double kTorqueHi = 1.0;
constexpr int kTorquePosteriorOptim = 50;   // quadrature support size
constexpr int kTorquePosteriorEval = 400;   // evaluation support size
constexpr int kTorqueGrid = 2001;           // posterior-mode search grid

inline Vec collision_reference_policy() {
  Vec v(3);
  v << 0.25, 0.75, 0.8;
  return v;
}

inline Vec breakage_reference_policy() {
  Vec v(3);
  v << 0.4, 0.2, 0.6;
  return v;
}

// Chosen so that every in-cube joint configuration reaching the target tip
// has some joint at >= 0.95 of its rigidity limit: reaching the target
// requires running close to the damage threshold, which is what makes the
// mode-based policy fragile and the robust trade-off non-trivial.
inline Vec torque_target_joints() {
  Vec v(3);
  v << 0.95, 0.50, 0.95;
  return v;
}

inline Vec torque_baseline_policy() {
  Vec v(3);
  v << 0.55, 0.55, 0.55;
  return v;
}

// Reference tip the baseline experiment measures its distance against; picked
// so the baseline cost responds to the torque multiplier with slope ~7 cost
// units per unit theta, giving an informative but non-degenerate posterior.
inline Eigen::Vector2d torque_baseline_target() { return {0.118190, 0.222639}; }

inline Task arm_task_skeleton(std::string name) {
  Task t;
  t.name = std::move(name);
  t.policy_dim = 3;
  t.env_dim = 1;
  t.pi_lo = Vec::Zero(3);
  t.pi_hi = Vec::Ones(3);
  t.sense = -1.0;  // costs
  t.default_kappa = 1.5;
  t.warp_prior_mu = 0.0;
  return t;
}

}  // namespace arm_detail

/// Collision-avoidance task. theta is the x-position of a vertical wall; the
/// arm collides when any joint position lies past the wall plane (the mount
/// itself is housed). Cost is scaled tip-to-target distance plus a penalty on
/// collision. Wall masses decay geometrically toward the riskier walls and are
/// scaled so the walls that hit the reference policy carry exactly 0.12 total.
inline Task arm_collision_task() {
  using namespace arm_detail;
  Task t = arm_task_skeleton("arm-collision");

  const Vec ref = collision_reference_policy();
  const ArmPose ref_pose = arm_fk(ref);
  const Eigen::Vector2d target = ref_pose.tip();
  const double ref_min_x = ref_pose.min_x();

  Mat support(kWallCount, 1);
  Vec wall(kWallCount), raw(kWallCount);
  std::vector<bool> colliding(kWallCount);
  for (int j = 0; j < kWallCount; ++j) {
    support(j, 0) = 1.0 - std::pow(kWallDecay, j);
    wall[j] = kWallLow + kWallSpan * support(j, 0);
    raw[j] = std::pow(kWallMassDecay, j);
    colliding[j] = wall[j] > ref_min_x;
  }

  // Split the geometric masses into the group that hits the reference policy
  // and the group that does not, rescale each group to its target mass, and
  // assign the group's last member by subtraction so the group sums are exact
  // under left-to-right accumulation.
  Vec probs(kWallCount);
  for (bool group : {true, false}) {
    const double share = group ? kCollisionMass : 1.0 - kCollisionMass;
    double raw_sum = 0.0;
    int last = -1;
    for (int j = 0; j < kWallCount; ++j)
      if (colliding[j] == group) {
        raw_sum += raw[j];
        last = j;
      }
    double partial = 0.0;
    for (int j = 0; j < kWallCount; ++j)
      if (colliding[j] == group && j != last) {
        probs[j] = share * raw[j] / raw_sum;
        partial += probs[j];
      }
    probs[last] = share - partial;
  }
  t.env = EnvDistribution::discrete(std::move(support), probs);

  t.evaluate = [target](const Vec& pi, const Vec& th) {
    const ArmPose pose = arm_fk(pi);
    const double wall_x = kWallLow + kWallSpan * th[0];
    const double d = (pose.tip() - target).norm();
    return kDistanceScale * d + (pose.min_x() < wall_x ? kSrePenalty : 0.0);
  };
  t.sre_prob = [wall, probs](const Vec& pi) {
    const double mx = arm_fk(pi).min_x();
    double p = 0.0;
    for (int j = 0; j < kWallCount; ++j)
      if (mx < wall[j]) p += probs[j];
    return p;
  };
  const auto sre = t.sre_prob;
  t.exact_fbar = [target, sre](const Vec& pi) {
    const double d = (arm_fk(pi).tip() - target).norm();
    return kDistanceScale * d + kSrePenalty * sre(pi);
  };
  return t;
}

/// Joint-breakage task. theta = u ~ Uniform(0,1) is a latent break trigger:
/// commanding the first joint inside [0.3, 0.7] carries a 5% chance of
/// breakage, charged as a penalty on top of the scaled distance cost. The
/// quadrature support materializes 200 draws once per task instance.
inline Task arm_breakage_task(std::uint64_t seed = 0) {
  using namespace arm_detail;
  Task t = arm_task_skeleton("arm-breakage");

  const Eigen::Vector2d target = arm_fk(breakage_reference_policy()).tip();
  Rng rng(seed);
  t.env = EnvDistribution::continuous_mc(
      [](Rng& r) { return Vec::Constant(1, uniform01(r)); }, kBreakMcCount, 1, rng);

  auto in_band = [](double j1) { return j1 >= kBreakBandLo && j1 <= kBreakBandHi; };
  t.evaluate = [target, in_band](const Vec& pi, const Vec& th) {
    const double d = (arm_tip(pi) - target).norm();
    const bool broke = in_band(pi[0]) && th[0] < kBreakProb;
    return kDistanceScale * d + (broke ? kSrePenalty : 0.0);
  };
  t.sre_prob = [in_band](const Vec& pi) { return in_band(pi[0]) ? kBreakProb : 0.0; };
  t.exact_fbar = [target, in_band](const Vec& pi) {
    const double d = (arm_tip(pi) - target).norm();
    return kDistanceScale * d + (in_band(pi[0]) ? kSrePenalty * kBreakProb : 0.0);
  };
  return t;
}

/// Deterministic core of the torque simulator: commanded joints are divided
/// by the torque multiplier theta; if any effective joint command exceeds its
/// rigidity limit of 1 the joint is damaged and the penalty replaces the
/// distance cost.
inline double torque_core_cost(const Vec& pi, double theta, const Eigen::Vector2d& target) {
  const Vec effective = pi / theta;
  if ((effective.array() > 1.0).any()) return arm_detail::kSrePenalty;
  return arm_detail::kDistanceScale * (arm_tip(effective) - target).norm();
}

struct TorqueTask {
  Task task;
  double theta_true = 0.0;  // multiplier the simulator hides from the optimiser
  double theta_map = 0.0;   // posterior mode over the search grid
  Vec posterior_eval;       // evaluation-grade posterior samples, natural units
};

/// Torque-setting task with an unknown environment variable. The true torque
/// multiplier is drawn once; a baseline experiment (noisy returns of a fixed
/// policy) yields a posterior over the multiplier, sampled by slice sampling.
/// The optimisation-time environment distribution is that posterior; returns
/// observed by the optimiser carry the same Gaussian noise as the baseline.
inline TorqueTask arm_torque_task(int baseline_trials = 100, double noise_sd = 2.0,
                                  std::uint64_t seed = 0) {
  using namespace arm_detail;
  if (baseline_trials < 1) throw std::invalid_argument("arm_torque_task: baseline_trials < 1");
  if (!(noise_sd > 0.0)) throw std::invalid_argument("arm_torque_task: noise_sd must be > 0");

  TorqueTask out;
  Task& t = out.task;
  t = arm_task_skeleton("arm-torque");
  t.obs_noise_sd = noise_sd;

  const Vec target_joints = torque_target_joints();
  const Eigen::Vector2d target = arm_tip(target_joints);
  const Eigen::Vector2d baseline_target = torque_baseline_target();
  const Vec baseline_policy = torque_baseline_policy();

  Rng true_rng(substream_seed(seed, 1));
  out.theta_true = kTorqueLo + (kTorqueHi - kTorqueLo) * uniform01(true_rng);

  // Baseline experiment: noisy returns of the fixed baseline policy under the
  // true multiplier. Only the sufficient statistics enter the likelihood.
  Rng noise_rng(substream_seed(seed, 2));
  const double c_true = torque_core_cost(baseline_policy, out.theta_true, baseline_target);
  double sum_y = 0.0, sum_yy = 0.0;
  for (int i = 0; i < baseline_trials; ++i) {
    const double y = c_true + noise_sd * normal01(noise_rng);
    sum_y += y;
    sum_yy += y * y;
  }

  const double inv_two_var = 1.0 / (2.0 * noise_sd * noise_sd);
  auto log_posterior = [&, sum_y, sum_yy, baseline_trials](double theta) {
    if (theta < kTorqueLo || theta > kTorqueHi) return -std::numeric_limits<double>::infinity();
    const double c = torque_core_cost(baseline_policy, theta, baseline_target);
    return -(sum_yy - 2.0 * c * sum_y + baseline_trials * c * c) * inv_two_var;
  };

  // Posterior mode over a fine grid; it seeds the chains so narrow posteriors
  // are entered directly instead of relying on a lucky random walk.
  int best = 0;
  double best_lp = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < kTorqueGrid; ++i) {
    const double theta = kTorqueLo + (kTorqueHi - kTorqueLo) * i / (kTorqueGrid - 1);
    const double lp = log_posterior(theta);
    if (lp > best_lp) {
      best_lp = lp;
      best = i;
    }
  }
  out.theta_map = kTorqueLo + (kTorqueHi - kTorqueLo) * best / (kTorqueGrid - 1);

  const double margin = (kTorqueHi - kTorqueLo) / (kTorqueGrid - 1);
  const double init = std::min(kTorqueHi - margin, std::max(kTorqueLo + margin, out.theta_map));
  auto run_chain = [&](int n, std::uint64_t chain_seed) {
    ChainConfig cc;
    cc.seed = chain_seed;
    cc.n_samples = n;
    cc.burn_in = 100;
    cc.thinning = 5;
    cc.initial_point = Vec::Constant(1, init);
    cc.step_widths = Vec::Constant(1, 0.02);
    return slice_sample([&](const Vec& v) { return log_posterior(v[0]); }, cc);
  };
  const Mat optim = run_chain(kTorquePosteriorOptim, substream_seed(seed, 3));
  const Mat eval = run_chain(kTorquePosteriorEval, substream_seed(seed, 4));
  out.posterior_eval = eval.col(0);

  auto normalize = [](double theta) {
    const double u = (theta - kTorqueLo) / (kTorqueHi - kTorqueLo);
    return std::min(1.0, std::max(0.0, u));
  };
  Mat support(kTorquePosteriorOptim, 1);
  for (int i = 0; i < kTorquePosteriorOptim; ++i) support(i, 0) = normalize(optim(i, 0));
  t.env = EnvDistribution::discrete(
      std::move(support), Vec::Constant(kTorquePosteriorOptim, 1.0 / kTorquePosteriorOptim));

  if (optim.col(0).maxCoeff() - optim.col(0).minCoeff() < 1e-12)
    t.warnings.push_back("torque posterior is degenerate: all quadrature samples identical");

  const Vec eval_samples = out.posterior_eval;
  t.evaluate = [target](const Vec& pi, const Vec& th) {
    return torque_core_cost(pi, kTorqueLo + (kTorqueHi - kTorqueLo) * th[0], target);
  };
  t.exact_fbar = [target, eval_samples](const Vec& pi) {
    double acc = 0.0;
    for (int i = 0; i < eval_samples.size(); ++i)
      acc += torque_core_cost(pi, eval_samples[i], target);
    return acc / static_cast<double>(eval_samples.size());
  };
  t.sre_prob = [eval_samples](const Vec& pi) {
    int hits = 0;
    for (int i = 0; i < eval_samples.size(); ++i)
      if (((pi / eval_samples[i]).array() > 1.0).any()) ++hits;
    return static_cast<double>(hits) / static_cast<double>(eval_samples.size());
  };
  return out;
}

/// Exact probability of the task's rare event at a (normalized) policy.
inline double sre_probability(const Task& task, const Vec& pi) {
  if (!task.sre_prob)
    throw std::invalid_argument("task '" + task.name + "' defines no rare-event indicator");
  return task.sre_prob(pi);
}

/// Constructs a benchmark by name. `seed` feeds the task-level randomness
/// (breakage support draws; the torque task's hidden multiplier, baseline
/// data, and posterior chains); tasks without construction randomness ignore
/// it exactly, so equal names and seeds give identical tasks.
inline Task make_task(const std::string& name, std::uint64_t seed = 0) {
  if (name == "fsre1") return fsre1_task();
  if (name == "fsre2") return fsre2_task();
  if (name == "arm-collision") return arm_collision_task();
  if (name == "arm-breakage") return arm_breakage_task(substream_seed(seed, 5));
  if (name == "arm-torque") return arm_torque_task(100, 2.0, substream_seed(seed, 6)).task;
  throw std::invalid_argument("unknown task '" + name +
                              "' (expected fsre1, fsre2, arm-collision, arm-breakage, arm-torque)");
}

}  // namespace aloq
