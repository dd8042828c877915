// SPDX-License-Identifier: Apache-2.0
//
// Configuration and per-iteration metrics shared by the neighbor trainer
// and the SDE baseline.

#ifndef NGRPO_TRAINER_HPP_
#define NGRPO_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <string>

#include "ngrpo/grpo.hpp"
#include "ngrpo/mathcore.hpp"
#include "ngrpo/solvers.hpp"

namespace ngrpo {

// Terminal reward R(x0; c).
using RewardFunction = std::function<double(const Vec& x0, const Vec& cond)>;
// Draws the condition for one iteration (may return an empty vector).
using PromptSampler = std::function<Vec(RngStream& rng)>;

struct TrainLoopConfig {
  int group_size = 12;       // G
  int anchors_per_iter = 4;  // B, neighbor trainer only
  int train_steps = 4;       // K, timesteps updated per iteration
  int rollout_steps = 8;     // T
  double sigma = 0.3;        // initial-noise perturbation strength, (0, 1]
  AdvantageMode advantage_mode = AdvantageMode::quasi_norm;
  double p = 0.8;            // quasi-norm exponent, (0, 2]
  double clip_eps = 1e-4;
  double beta_kl = 0.0;
  double lr = 7e-4;
  // Global gradient-norm spike guard applied before each optimizer step,
  // sized to bind on ~1% of iterations. Outlying candidates occasionally
  // produce ratio spikes in low dimension; the cap must stay loose enough
  // not to erase the advantage scaling. 0 disables.
  double max_grad_norm = 50.0;
  int iterations = 300;
  SolverKind rollout_solver = SolverKind::euler;
  double schedule_shift = 1.0;
  // Leap-policy temperature: 1 = raw squared distances, 0 = scale-matched
  // per step (2 * mean squared candidate spread). Raw distances suit
  // high-dimensional latents; the scale-matched form is the stable choice
  // for 2-D states and is the default here.
  double leap_temperature = 0.0;
  // Accumulate the B anchor gradients into one optimizer step. The
  // per-anchor placement (update inside the anchor loop) is available as
  // `true`; at this scale its later anchors step far outside the tiny
  // trust region and destabilize training.
  bool per_anchor_update = false;
  bool shared_step_set = true;    // one step set per iteration vs per anchor
  bool include_anchor_term = true;
  bool sample_std = false;        // population std by default
  bool parallel_rollout = true;
  // SDE baseline noise schedule: scale * sqrt(t/(1-t+eps_s)) * sqrt(dt),
  // clipped to [0, sigma_clip]; final step deterministic.
  double sde_noise_scale = 0.3;
  double sde_eps_s = 0.01;
  double sde_sigma_clip = 0.5;
  // MixGRPO-style sliding window over trainable steps; 0 disables it.
  int sde_window = 0;

  void validate() const;
};

struct IterationMetrics {
  int iter = 0;
  std::string variant;
  double mean_reward = 0.0;
  double std_reward = 0.0;
  double objective = 0.0;     // mean per-(anchor, step) clipped objective
  double frac_clipped = 0.0;  // fraction of ratio terms outside the trust region
  double nfe_old = 0.0;       // per-sample rollout evaluations (= T)
  double nfe_theta = 0.0;     // per-sample gradient-bearing evaluations (B/G * K)
  long nfe_old_total = 0;     // G * T, counted from the trajectories
  long nfe_theta_total = 0;
  double wall_ms = 0.0;
  std::uint64_t seed = 0;
};

// Advantages under the configured mode.
AdvantageVector compute_advantages(const RewardGroup& rewards,
                                   const TrainLoopConfig& cfg);

// k distinct values drawn uniformly from {lo, ..., hi} (partial
// Fisher-Yates), order random. Used for anchor and step-index sampling.
std::vector<int> sample_without_replacement(int lo, int hi, int k, RngStream& rng);

}  // namespace ngrpo

#endif  // NGRPO_TRAINER_HPP_
