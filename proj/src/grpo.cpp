// SPDX-License-Identifier: Apache-2.0

#include "ngrpo/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ngrpo {

namespace {

Vec centered(const RewardGroup& g) {
  if (g.size() < 2)
    throw std::invalid_argument("advantages: need a group of at least 2");
  if (!all_finite(g.rewards))
    throw std::invalid_argument("advantages: non-finite reward");
  const auto [mean, _] = mean_std(g.rewards);
  Vec c(g.rewards.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = g.rewards[i] - mean;
  return c;
}

}  // namespace

AdvantageVector advantages_standard(const RewardGroup& g, bool sample_std) {
  Vec c = centered(g);
  const double n = static_cast<double>(c.size());
  double var = dot(c, c) / (sample_std ? n - 1.0 : n);
  const double sd = std::sqrt(var);
  AdvantageVector adv;
  adv.mode = AdvantageMode::standard;
  if (sd < kDegenerateGroupEps) {
    adv.values.assign(c.size(), 0.0);
  } else {
    adv.values = scaled(c, 1.0 / sd);
  }
  return adv;
}

AdvantageVector advantages_quasinorm(const RewardGroup& g, double p) {
  if (!(p > 0.0) || p > 2.0)
    throw std::invalid_argument("advantages_quasinorm: p must be in (0, 2]");
  Vec c = centered(g);
  const double norm = lp_norm(c, p);
  AdvantageVector adv;
  adv.mode = AdvantageMode::quasi_norm;
  adv.p = p;
  if (norm < kDegenerateGroupEps) {
    adv.values.assign(c.size(), 0.0);
  } else {
    adv.values = scaled(c, 1.0 / norm);
  }
  return adv;
}

ClippedObjective clipped_objective(const AdvantageVector& adv, const Vec& ratios,
                                   const GrpoObjectiveConfig& cfg,
                                   double kl_estimate) {
  if (adv.values.size() != ratios.size())
    throw std::invalid_argument("clipped_objective: size mismatch");
  ClippedObjective out;
  out.per_term.resize(ratios.size());
  out.clipped.resize(ratios.size());
  const double lo = 1.0 - cfg.clip_eps;
  const double hi = 1.0 + cfg.clip_eps;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    const double rho = ratios[i];
    if (!(rho > 0.0) || !std::isfinite(rho))
      throw std::invalid_argument("clipped_objective: ratio must be positive and finite");
    const double a = adv.values[i];
    const double rho_c = std::clamp(rho, lo, hi);
    out.per_term[i] = std::min(a * rho, a * rho_c);
    out.clipped[i] = rho < lo || rho > hi;
    out.value += out.per_term[i];
  }
  if (cfg.beta_kl > 0.0) out.value += cfg.beta_kl * kl_estimate;
  return out;
}

Vec clipped_objective_dratio(const AdvantageVector& adv, const Vec& ratios,
                             const GrpoObjectiveConfig& cfg) {
  if (adv.values.size() != ratios.size())
    throw std::invalid_argument("clipped_objective_dratio: size mismatch");
  const double lo = 1.0 - cfg.clip_eps;
  const double hi = 1.0 + cfg.clip_eps;
  Vec d(ratios.size());
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    const double a = adv.values[i];
    const double rho = ratios[i];
    const double rho_c = std::clamp(rho, lo, hi);
    // The clipped branch carries no dependence on rho when it is the
    // strict minimum; ties keep the unclipped derivative.
    d[i] = (a * rho <= a * rho_c) ? a : 0.0;
  }
  return d;
}

}  // namespace ngrpo
