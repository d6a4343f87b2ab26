#pragma once

#include <cmath>
#include <stdexcept>

#include "aloq/direct.hpp"
#include "aloq/quadrature.hpp"

namespace aloq {

struct AcquisitionConfig {
  double kappa = 1.5;
  int direct_budget = 500;
  double direct_tol = 1e-4;

  DirectConfig direct() const {
    DirectConfig d;
    d.budget = direct_budget;
    d.tol = direct_tol;
    return d;
  }

  void validate() const {
    if (!(kappa >= 0.0)) throw std::invalid_argument("AcquisitionConfig: kappa must be >= 0");
    direct().validate();
  }
};

/// Optimism-in-the-face-of-uncertainty score on the marginal objective:
/// mean of f_bar(pi) plus kappa standard deviations.
inline double alpha_aloq_from(const FbarEvaluator& ev, const Vec& pi, double kappa) {
  const MarginalEstimate m = ev.moments(pi);
  return m.mean + kappa * std::sqrt(std::max(m.variance, 0.0));
}

inline double alpha_aloq(const Vec& pi, const GpPosterior& post, const EnvDistribution& env,
                         double kappa) {
  return alpha_aloq_from(FbarEvaluator(post, env), pi, kappa);
}

/// Maximizes the acquisition over the unit policy box.
inline DirectResult maximize_alpha_aloq(const FbarEvaluator& ev, double kappa,
                                        const AcquisitionConfig& cfg) {
  cfg.validate();
  return direct_maximize([&](const Vec& pi) { return alpha_aloq_from(ev, pi, kappa); },
                         ev.policy_dim(), cfg.direct());
}

}  // namespace aloq
