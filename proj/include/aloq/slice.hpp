#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

#include "aloq/common.hpp"
#include "aloq/rng.hpp"

namespace aloq {

struct ChainConfig {
  std::uint64_t seed = 0;
  int n_samples = 1;
  int burn_in = 0;
  int thinning = 1;   // sweeps between recorded samples; 0 records the current state
  Vec initial_point;
  Vec step_widths;    // empty selects width 1.0 in every dimension
  int max_step_outs = 50;

  void validate() const {
    if (n_samples < 1) throw std::invalid_argument("ChainConfig: n_samples must be >= 1");
    if (burn_in < 0 || thinning < 0) throw std::invalid_argument("ChainConfig: negative schedule");
    if (initial_point.size() == 0) throw std::invalid_argument("ChainConfig: empty initial point");
    if (step_widths.size() != 0 && step_widths.size() != initial_point.size())
      throw std::invalid_argument("ChainConfig: step width dimension mismatch");
    if (max_step_outs < 0) throw std::invalid_argument("ChainConfig: negative max_step_outs");
  }
};

using LogDensity = std::function<double(const Vec&)>;

namespace detail {

// One univariate slice-sampling update (stepping out, then shrinkage) of
// coordinate d, following Neal (2003), Fig. 3 and Fig. 5.
inline void slice_update_coord(const LogDensity& logf, Vec& x, double& fx, int d, double width,
                               int max_step_outs, Rng& rng) {
  const double x0 = x[d];
  const double log_slice = fx - std::exponential_distribution<double>(1.0)(rng);

  // Step out: place an interval of size `width` around x0 at a random offset
  // and expand each end until it falls off the slice or hits the step budget.
  double lo = x0 - width * uniform01(rng);
  double hi = lo + width;
  int j = static_cast<int>(std::floor(max_step_outs * uniform01(rng)));
  int k = (max_step_outs - 1) - j;
  auto eval_at = [&](double v) {
    x[d] = v;
    const double r = logf(x);
    if (std::isnan(r)) throw std::runtime_error("slice_sample: log density returned NaN");
    return r;
  };
  while (j-- > 0 && eval_at(lo) > log_slice) lo -= width;
  while (k-- > 0 && eval_at(hi) > log_slice) hi += width;

  // Shrink toward x0 until a point inside the slice is found.
  for (int iter = 0; iter < 1000; ++iter) {
    const double cand = lo + uniform01(rng) * (hi - lo);
    const double fc = eval_at(cand);
    if (fc > log_slice) {
      x[d] = cand;
      fx = fc;
      return;
    }
    if (cand < x0) lo = cand; else hi = cand;
    if (!(hi - lo > std::abs(x0) * 1e-15 + 1e-300)) break;
  }
  throw std::runtime_error("slice_sample: shrinkage collapsed in coordinate " + std::to_string(d));
}

}  // namespace detail

/// Coordinate-cycling slice sampler. Returns n_samples rows; the last row is
/// the chain's final state, which makes warm starts a matter of reusing it as
/// the next initial point. Deterministic given the config seed.
inline Mat slice_sample(const LogDensity& logf, const ChainConfig& cfg) {
  cfg.validate();
  const int dim = static_cast<int>(cfg.initial_point.size());
  Vec widths = cfg.step_widths.size() ? cfg.step_widths : Vec::Ones(dim);
  for (int d = 0; d < dim; ++d)
    if (!(widths[d] > 0.0)) throw std::invalid_argument("ChainConfig: step widths must be positive");

  Vec x = cfg.initial_point;
  double fx = logf(x);
  if (!std::isfinite(fx))
    throw std::invalid_argument("slice_sample: non-finite log density at the initial point");

  Rng rng(cfg.seed);
  auto sweep = [&] {
    for (int d = 0; d < dim; ++d)
      detail::slice_update_coord(logf, x, fx, d, widths[d], cfg.max_step_outs, rng);
  };

  for (int i = 0; i < cfg.burn_in; ++i) sweep();
  Mat out(cfg.n_samples, dim);
  for (int s = 0; s < cfg.n_samples; ++s) {
    for (int t = 0; t < cfg.thinning; ++t) sweep();
    out.row(s) = x.transpose();
  }
  return out;
}

}  // namespace aloq
