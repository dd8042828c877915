// SPDX-License-Identifier: Apache-2.0
//
// Neighbor GRPO: deterministic ODE rollouts from a perturbed-noise
// neighborhood, a softmax-over-distances surrogate leaping policy, anchor
// conditioned policy ratios with symmetric anchor sampling, and the full
// training iteration.

#ifndef NGRPO_NEIGHBOR_HPP_
#define NGRPO_NEIGHBOR_HPP_

#include <vector>

#include "ngrpo/grpo.hpp"
#include "ngrpo/mathcore.hpp"
#include "ngrpo/solvers.hpp"
#include "ngrpo/trainer.hpp"
#include "ngrpo/velocity.hpp"

namespace ngrpo {

// G initial noises eps_i = sqrt(1-sigma^2) eps* + sigma delta_i around a
// shared base noise. Each member is marginally standard normal.
struct NoiseGroup {
  Vec eps_star;
  double sigma = 0.0;
  std::vector<Vec> members;
};

// sigma in (0, 1]: sigma -> 0 collapses onto eps*, sigma = 1 gives fully
// independent noises. Throws outside that range or if group_size < 2.
NoiseGroup perturb_noise(const Vec& eps_star, double sigma, int group_size,
                         RngStream& rng);

// A group of stop-gradient trajectories sharing condition and schedule.
struct GroupRollout {
  std::vector<Trajectory> trajectories;
  Vec condition;
  TimeSchedule schedule;
  RewardGroup rewards;

  int group_size() const { return static_cast<int>(trajectories.size()); }
  // Candidate states of every member at schedule point `step` (0..T).
  std::vector<Vec> states_at(int step) const;
};

struct LeapPolicy {
  Vec probs;
  Vec log_probs;
};

// Softmax over negative squared distances from the anchor to each group
// state; temperature 1 uses the raw squared distances.
LeapPolicy leap_policy(const std::vector<Vec>& group_states, const Vec& anchor,
                       double temperature = 1.0);

// Scale-matched leap temperature 2*sigma_pi^2 with sigma_pi^2 the mean
// squared deviation of the candidates from their mean. Raw squared
// distances assume the members are far apart in the norm, which holds in
// high dimension but not for 2-D states; this keeps the policy's logits
// O(1) at every step. Used when TrainLoopConfig.leap_temperature == 0.
double auto_leap_temperature(const std::vector<Vec>& group_states);

// Anchor-conditioned policy ratios at one schedule step.
//
// step is the transition id in [1, T]: candidates live at times[step], the
// anchor's stored predecessor at times[step-1]. The new-policy anchor point
// is one Euler/DDIM step from that predecessor under model_new; the
// old-policy anchor point is the stored rollout state (distance zero to
// member `anchor_index` itself). Ratios are formed in log space.
Vec anchor_ratios(const GroupRollout& rollout, int anchor_index, int step,
                  const VelocityModel& model_new, double temperature = 1.0);

// Clipped objective of one (anchor, step) pair together with its analytic
// parameter gradient (ascent direction d value / d theta).
struct AnchorStepObjective {
  double value = 0.0;
  ParamGrad grad;
  Vec ratios;
  int clipped_count = 0;
};

AnchorStepObjective anchor_step_objective(const GroupRollout& rollout,
                                          int anchor_index, int step,
                                          const VelocityModel& model_new,
                                          const AdvantageVector& adv,
                                          const GrpoObjectiveConfig& cfg,
                                          double temperature = 1.0,
                                          bool include_anchor_term = true,
                                          bool want_grad = true);

class NeighborGrpoTrainer {
 public:
  NeighborGrpoTrainer(VelocityModel model, TrainLoopConfig cfg);

  // One full iteration: snapshot the old policy, build the noise
  // neighborhood, roll out G deterministic trajectories, normalize rewards,
  // then update along B sampled anchors over K sampled steps.
  IterationMetrics iterate(int iter_index, const PromptSampler& prompts,
                           const RewardFunction& reward, RngStream& rng);

  const VelocityModel& model() const { return model_; }
  VelocityModel& model() { return model_; }
  const TrainLoopConfig& config() const { return cfg_; }

 private:
  VelocityModel model_;
  TrainLoopConfig cfg_;
  TimeSchedule schedule_;
  AdamOptimizer opt_;
};

// Diagnostic for the symmetric-anchor estimator on a fixed rollout:
// the mean of all G single-anchor objectives must equal the all-anchor
// objective as plain arithmetic, uniform single draws must be unbiased,
// and the accumulated gradient must not depend on anchor order.
struct AnchorEstimatorReport {
  double full_objective = 0.0;        // mean over all G anchors
  double mean_of_singles = 0.0;       // same quantity, summed one by one
  double mc_mean = 0.0;               // B=1 Monte-Carlo estimate
  double mc_std_error = 0.0;
  int mc_draws = 0;
  double max_grad_permutation_gap = 0.0;  // two accumulation orders compared
};

AnchorEstimatorReport anchor_estimator_check(const GroupRollout& rollout,
                                             const VelocityModel& model_new,
                                             const std::vector<int>& steps,
                                             const AdvantageVector& adv,
                                             const GrpoObjectiveConfig& cfg,
                                             int mc_draws, RngStream& rng);

}  // namespace ngrpo

#endif  // NGRPO_NEIGHBOR_HPP_
