#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

#include "aloq/common.hpp"

namespace aloq {

using Objective = std::function<double(const Vec&)>;

struct DirectConfig {
  int budget = 500;
  double tol = 1e-4;
  double epsilon = 1e-4;  // relative-improvement slack in the potential-optimality test

  void validate() const {
    if (budget < 1) throw std::invalid_argument("DirectConfig: budget must be >= 1");
    if (!(tol >= 0.0)) throw std::invalid_argument("DirectConfig: bad tol");
  }
};

struct DirectResult {
  Vec argmax;
  double value = 0.0;
  int evaluations = 0;
};

namespace detail {

struct DirectRect {
  Vec center;
  std::vector<int> levels;  // trisection count per dimension
  double g = 0.0;           // negated objective at the center
  long order = 0;           // creation index, the deterministic tie-breaker
};

/// Half-diagonal from the sorted level multiset, so rectangles with the same
/// shape always land in the same diameter bucket.
inline double rect_diameter(const std::vector<int>& levels) {
  std::vector<int> s(levels);
  std::sort(s.begin(), s.end(), std::greater<int>());
  double acc = 0.0;
  for (int l : s) acc += std::pow(3.0, -2.0 * l);
  return 0.5 * std::sqrt(acc);
}

}  // namespace detail

/// DIRECT (dividing rectangles) global maximization over the unit box:
/// deterministic trisection of potentially optimal rectangles, selected from
/// the lower-right convex hull of (diameter, value) with a relative slack.
/// Stops at the evaluation budget or when every potentially optimal rectangle
/// has shrunk below tol.
inline DirectResult direct_maximize(const Objective& objective, int dim,
                                    const DirectConfig& cfg = {}) {
  cfg.validate();
  if (dim < 1) throw std::invalid_argument("direct_maximize: dim must be >= 1");

  std::vector<detail::DirectRect> rects;
  int evals = 0;
  long best_idx = 0;

  auto eval_g = [&](const Vec& x) {
    ++evals;
    return -objective(x);
  };

  {
    detail::DirectRect r;
    r.center = Vec::Constant(dim, 0.5);
    r.levels.assign(dim, 0);
    r.g = eval_g(r.center);
    r.order = 0;
    rects.push_back(std::move(r));
  }

  auto refresh_best = [&]() {
    best_idx = 0;
    for (std::size_t i = 1; i < rects.size(); ++i)
      if (rects[i].g < rects[best_idx].g) best_idx = static_cast<long>(i);
  };
  refresh_best();

  while (evals < cfg.budget) {
    // best rectangle per diameter bucket
    std::map<double, std::size_t> group_best;
    for (std::size_t i = 0; i < rects.size(); ++i) {
      const double d = detail::rect_diameter(rects[i].levels);
      auto it = group_best.find(d);
      if (it == group_best.end() || rects[i].g < rects[it->second].g)
        group_best[d] = i;
    }
    std::vector<std::pair<double, std::size_t>> cand(group_best.begin(), group_best.end());

    const double g_best = rects[best_idx].g;
    std::vector<std::size_t> optimal;
    for (std::size_t j = 0; j < cand.size(); ++j) {
      const double dj = cand[j].first, gj = rects[cand[j].second].g;
      double k_lo = 0.0;
      double k_hi = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < cand.size(); ++i) {
        if (i == j) continue;
        const double di = cand[i].first, gi = rects[cand[i].second].g;
        const double slope = (gj - gi) / (dj - di);
        if (di < dj)
          k_lo = std::max(k_lo, slope);
        else
          k_hi = std::min(k_hi, slope);
      }
      if (k_lo > k_hi) continue;
      if (std::isfinite(k_hi) && gj - k_hi * dj > g_best - cfg.epsilon * std::abs(g_best))
        continue;
      optimal.push_back(cand[j].second);
    }
    if (optimal.empty()) break;

    double min_opt_diam = std::numeric_limits<double>::infinity();
    for (std::size_t i : optimal)
      min_opt_diam = std::min(min_opt_diam, detail::rect_diameter(rects[i].levels));
    if (min_opt_diam < cfg.tol) break;

    bool out_of_budget = false;
    for (std::size_t ri : optimal) {
      const int lmin = *std::min_element(rects[ri].levels.begin(), rects[ri].levels.end());
      const double delta = std::pow(3.0, -(lmin + 1));
      std::vector<int> long_dims;
      for (int d = 0; d < dim; ++d)
        if (rects[ri].levels[d] == lmin) long_dims.push_back(d);

      struct Probe {
        int d;
        double w;
        double g_lo, g_hi;
        Vec x_lo, x_hi;
      };
      std::vector<Probe> probes;
      for (int d : long_dims) {
        if (evals + 2 > cfg.budget) {
          out_of_budget = true;
          break;
        }
        Probe p;
        p.d = d;
        p.x_lo = rects[ri].center;
        p.x_lo[d] -= delta;
        p.x_hi = rects[ri].center;
        p.x_hi[d] += delta;
        p.g_lo = eval_g(p.x_lo);
        p.g_hi = eval_g(p.x_hi);
        p.w = std::min(p.g_lo, p.g_hi);
        probes.push_back(std::move(p));
      }
      std::stable_sort(probes.begin(), probes.end(),
                       [](const Probe& a, const Probe& b) { return a.w < b.w; });

      for (const Probe& p : probes) {
        detail::DirectRect lo, hi;
        lo.center = p.x_lo;
        hi.center = p.x_hi;
        rects[ri].levels[p.d] += 1;  // the surviving middle slab narrows
        lo.levels = rects[ri].levels;
        hi.levels = rects[ri].levels;
        lo.g = p.g_lo;
        hi.g = p.g_hi;
        lo.order = static_cast<long>(rects.size());
        rects.push_back(std::move(lo));
        hi.order = static_cast<long>(rects.size());
        rects.push_back(std::move(hi));
      }
      if (out_of_budget) break;
    }
    refresh_best();
    if (out_of_budget) break;
  }

  refresh_best();
  DirectResult res;
  res.argmax = rects[best_idx].center;
  res.value = -rects[best_idx].g;
  res.evaluations = evals;
  return res;
}

/// Exact maximizer over a finite candidate list; ties break to the lowest
/// index.
inline std::pair<int, double> argmax_over_set(const std::vector<Vec>& candidates,
                                              const Objective& objective) {
  if (candidates.empty()) throw std::invalid_argument("argmax_over_set: empty candidate list");
  int best = 0;
  double best_v = objective(candidates[0]);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double v = objective(candidates[i]);
    if (v > best_v) {
      best = static_cast<int>(i);
      best_v = v;
    }
  }
  return {best, best_v};
}

}  // namespace aloq
