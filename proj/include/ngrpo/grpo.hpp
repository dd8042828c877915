// SPDX-License-Identifier: Apache-2.0
//
// Reward-to-advantage pipeline (standard group normalization and
// L_p quasi-norm reweighting) and the clipped policy-ratio objective
// shared by both trainers. Everything here is a pure function.

#ifndef NGRPO_GRPO_HPP_
#define NGRPO_GRPO_HPP_

#include <vector>

#include "ngrpo/mathcore.hpp"

namespace ngrpo {

struct RewardGroup {
  Vec rewards;
  int size() const { return static_cast<int>(rewards.size()); }
};

enum class AdvantageMode { standard, quasi_norm };

struct AdvantageVector {
  Vec values;
  AdvantageMode mode = AdvantageMode::standard;
  double p = 2.0;
};

// Threshold below which a group is considered degenerate (no contrastive
// signal); such groups yield all-zero advantages instead of dividing by ~0.
inline constexpr double kDegenerateGroupEps = 1e-8;

// (r_i - mean) / std with the population convention (divide by G), so a
// non-degenerate group always lands on the L2 sphere of radius sqrt(G).
// `sample_std` switches to the G-1 convention. Throws if G < 2.
AdvantageVector advantages_standard(const RewardGroup& g, bool sample_std = false);

// Mean-center, then divide by the L_p (quasi-)norm of the centered vector,
// p in (0, 2]. p = 2 equals advantages_standard scaled by 1/sqrt(G).
AdvantageVector advantages_quasinorm(const RewardGroup& g, double p);

struct GrpoObjectiveConfig {
  double clip_eps = 1e-4;  // ratio clipped to [1-clip_eps, 1+clip_eps]
  double beta_kl = 0.0;
};

struct ClippedObjective {
  double value = 0.0;
  Vec per_term;
  // true where the ratio left the trust region (|rho - 1| > clip_eps)
  std::vector<bool> clipped;
};

// sum_i min(A_i rho_i, A_i clip(rho_i)). The optional KL estimate is added
// scaled by beta_kl only when beta_kl > 0; callers that want the KL term
// supply their own estimate. Throws on nonpositive or nonfinite ratios.
ClippedObjective clipped_objective(const AdvantageVector& adv, const Vec& ratios,
                                   const GrpoObjectiveConfig& cfg,
                                   double kl_estimate = 0.0);

// d(min(A rho, A clip(rho)))/d(rho): A_i where the unclipped branch is the
// minimum (ties included), 0 where the clipped branch wins. Trainers use
// this mask so their gradients match clipped_objective exactly.
Vec clipped_objective_dratio(const AdvantageVector& adv, const Vec& ratios,
                             const GrpoObjectiveConfig& cfg);

}  // namespace ngrpo

#endif  // NGRPO_GRPO_HPP_
