// SPDX-License-Identifier: Apache-2.0
//
// SDE-based GRPO baseline: stochastic rollouts with an exact Gaussian
// step policy, the per-sample clipped-ratio update, and the diagnostics
// connecting that objective to an advantage-weighted distance loss
// (drift residual included).

#ifndef NGRPO_SDE_BASELINE_HPP_
#define NGRPO_SDE_BASELINE_HPP_

#include <vector>

#include "ngrpo/grpo.hpp"
#include "ngrpo/mathcore.hpp"
#include "ngrpo/solvers.hpp"
#include "ngrpo/trainer.hpp"
#include "ngrpo/velocity.hpp"

namespace ngrpo {

// The one-step policy of the stochastic sampler is the isotropic Gaussian
//   pi(x_t | x_{t+dt}) = N(mu, sigma_t^2 I),
//   mu = x_ode - (sigma_t^2 / 2 t_plus) * eps_hat(x_{t+dt}, t_plus).
struct GaussianPolicyEval {
  Vec mu;
  double sigma_t = 0.0;
  double log_prob = 0.0;  // exact density, normalization constant included
};

GaussianPolicyEval gaussian_log_prob(const VelocityField& model, const Vec& x_t_plus,
                                     double t_plus, double dt, double sigma_t,
                                     const Vec& sample, const Vec& cond);

// Difference of drift corrections between two parameter sets,
// o = (sigma^2 / 2t) (eps_hat_new - eps_hat_old); exactly zero when the
// models coincide.
struct DriftResidual {
  Vec o_t;
};

DriftResidual drift_residual(const VelocityField& model_new,
                             const VelocityField& model_old, const Vec& x_t, double t,
                             double sigma_t, const Vec& cond);

// Analytic parameter gradient of -log pi(sample | x_t_plus) under `model`,
// the quantity the trainer backpropagates per transition.
ParamGrad gaussian_nll_grad(const VelocityModel& model, const Vec& x_t_plus,
                            double t_plus, double dt, double sigma_t,
                            const Vec& sample, const Vec& cond);

class SdeGrpoTrainer {
 public:
  SdeGrpoTrainer(VelocityModel model, TrainLoopConfig cfg);

  // One iteration: G stochastic rollouts from a shared initial noise,
  // group-normalized advantages, per-sample clipped ratios from the exact
  // Gaussian step policy over K sampled steps, one optimizer update.
  IterationMetrics iterate(int iter_index, const PromptSampler& prompts,
                           const RewardFunction& reward, RngStream& rng);

  const VelocityModel& model() const { return model_; }
  VelocityModel& model() { return model_; }
  const TrainLoopConfig& config() const { return cfg_; }

  // Trainable step ids for an iteration, honoring the optional sliding
  // window (width cfg.sde_window) that moves from high to low noise over
  // the configured number of iterations.
  std::vector<int> eligible_steps(int iter_index) const;

 private:
  VelocityModel model_;
  TrainLoopConfig cfg_;
  TimeSchedule schedule_;
  SdeConfig sde_;
  AdamOptimizer opt_;
};

// One stored stochastic transition, kept so the contrastive identity can
// be replayed exactly.
struct SdeSampleRecord {
  Vec x_prev;      // state at t_plus
  double t_plus = 0.0;
  double dt = 0.0;
  double sigma = 0.0;
  Vec noise;       // the injected standard-normal draw
  Vec sample;      // resulting state at t_plus - dt
  Vec cond;
  double advantage = 0.0;
};

std::vector<SdeSampleRecord> records_from_trajectory(const Trajectory& traj,
                                                     const Vec& cond,
                                                     double advantage);

// Verifies, on a batch of stored transitions:
//   1. the exact negative log-likelihood under model_new equals
//      (1/2 sigma^2) || x_tilde - x_ode_new + o ||^2 + (d/2) log(2 pi sigma^2)
//      with x_tilde the old ODE point plus the recorded noise;
//   2. the advantage-weighted NLL gradient equals the gradient of that
//      residual form assembled term by term (independent route);
//   3. dropping the residual changes the gradient by an amount bounded by
//      a constant times ||o||, reported as `bound_constant`.
struct ContrastiveReport {
  double max_identity_gap = 0.0;
  double residual_norm = 0.0;          // max ||o|| over the batch
  double grad_dual_route_rel_err = 0.0;
  double dropped_residual_gap = 0.0;   // || grad_nll - grad_mse_without_o ||_max
  double bound_constant = 0.0;         // gap / max(residual_norm, 1e-300)
};

ContrastiveReport contrastive_equivalence_check(
    const VelocityModel& model_new, const VelocityModel& model_old,
    const std::vector<SdeSampleRecord>& batch);

}  // namespace ngrpo

#endif  // NGRPO_SDE_BASELINE_HPP_
