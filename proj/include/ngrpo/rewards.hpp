// SPDX-License-Identifier: Apache-2.0
//
// Analytic toy rewards evaluated at the terminal sample.

#ifndef NGRPO_REWARDS_HPP_
#define NGRPO_REWARDS_HPP_

#include <string>
#include <vector>

#include "ngrpo/mathcore.hpp"

namespace ngrpo {

// Isotropic Gaussian mixture with shared component std.
struct GaussianMixture {
  std::vector<Vec> means;
  Vec weights;          // normalized on construction
  double component_std = 1.0;

  int dim() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }
  double log_density(const Vec& x) const;
  Vec sample(RngStream& rng) const;
  int sample_component(RngStream& rng) const;
};

enum class RewardKind { target_logdensity, neg_mode_distance, flatness_probe };

RewardKind reward_kind_from_name(const std::string& name);
const char* reward_kind_name(RewardKind k);

// Deterministic scalar reward, finite on all of R^d.
//  - target_logdensity: exact log-density of `mixture`.
//  - neg_mode_distance: -||x - mu_c|| with mu_c picked by the one-hot
//    condition, falling back to mode_index when unconditional.
//  - flatness_probe: constant plateau_value inside plateau_radius, then
//    decreasing with distance; exercises the flat-advantage regime.
struct RewardFn {
  RewardKind kind = RewardKind::target_logdensity;
  GaussianMixture mixture;
  int mode_index = 0;
  double plateau_radius = 1.0;
  double plateau_value = 1.0;

  double eval(const Vec& x0, const Vec& cond) const;
};

double reward_eval(const RewardFn& fn, const Vec& x0, const Vec& cond);

}  // namespace ngrpo

#endif  // NGRPO_REWARDS_HPP_
