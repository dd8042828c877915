// SPDX-License-Identifier: Apache-2.0
//
// Deterministic ODE steppers (first-order Euler/DDIM and a second-order
// multistep in the data-prediction parameterization), the marginal-matching
// SDE step, time schedules, and full rollouts with NFE accounting.
//
// Group rollouts come in a serial reference implementation and an
// OpenMP-parallel kernel; both produce bit-identical trajectories because
// each group member owns a forked RNG stream.

#ifndef NGRPO_SOLVERS_HPP_
#define NGRPO_SOLVERS_HPP_

#include <optional>
#include <string>
#include <vector>

#include "ngrpo/mathcore.hpp"
#include "ngrpo/velocity.hpp"

namespace ngrpo {

// Time grid for a T-step rollout: T+1 strictly decreasing points with
// times[0] = 1 and times[T] = 0, so T steps cost exactly T field
// evaluations for both solvers.
struct TimeSchedule {
  std::vector<double> times;

  static TimeSchedule uniform(int steps);
  // Optional warp t -> shift*t / (1 + (shift-1)*t) applied to each grid
  // point; shift = 1 leaves the uniform grid unchanged. Endpoints stay
  // exactly 1 and 0.
  static TimeSchedule uniform_shifted(int steps, double shift);

  int steps() const { return static_cast<int>(times.size()) - 1; }
  void validate() const;
};

enum class SolverKind { euler, dpmpp, sde };

const char* solver_name(SolverKind k);
SolverKind solver_from_name(const std::string& name);

// Noise scale per step for the SDE sampler. sigma[j] applies to step j
// (transition times[j-1] -> times[j], 0-based j in [1, T]); the final step
// into t = 0 is forced deterministic.
struct SdeConfig {
  std::vector<double> sigma;

  // sigma_j = scale * sqrt(t / (1 - t + eps_s)) * sqrt(dt) at the step's
  // source time t, clipped to [0, clip_max]; sigma_T = 0.
  static SdeConfig make(const TimeSchedule& schedule, double scale,
                        double eps_s = 0.01, double clip_max = 0.5);
};

struct Trajectory {
  std::vector<double> times;       // decreasing, from 1 to 0
  std::vector<Vec> states;         // states[j] at times[j]
  std::vector<Vec> injected_noise; // per step, SDE rollouts only
  std::vector<double> sigma_used;  // per step, SDE rollouts only
  long nfe = 0;

  const Vec& terminal() const { return states.back(); }
  const Vec& initial() const { return states.front(); }
};

// x_{t-dt} = x_t - dt * v(x_t, t). Exactly one field evaluation.
Vec euler_step(const VelocityField& field, const Vec& x_t, double t, double dt,
               const Vec& cond);

// Second-order two-step multistep update in the data-prediction
// parameterization x0_hat = x_t - t * v(x_t, t). Stepping s -> r (r < s)
// with the previous data prediction recorded at s_prev:
//   x_r = (r/s) x_s + (1 - r/s) x0_hat(s)
//         + c * (x0_hat(s) - x0_hat(s_prev)) / (s - s_prev),
//   c   = -r*log(r/s) + r - s        (c -> -s as r -> 0),
// which integrates a linear-in-time data prediction exactly. One new field
// evaluation; the first step of a trajectory falls back to euler_step.
struct DpmppHistory {
  bool has_prev = false;
  double t_prev = 0.0;
  Vec x0_prev;
};

Vec dpmpp_step(const VelocityField& field, DpmppHistory& history, const Vec& x_t,
               double t, double dt, const Vec& cond);

// Marginal-matching stochastic step
//   x_next = x_ode - (sigma^2 / 2t) * eps_hat + sigma * eps,
//   eps_hat = x_t + (1-t) v(x_t, t),
// with x_ode the Euler point. Returns the stochastic point, the
// deterministic point and eps_hat; one field evaluation.
struct SdeStepResult {
  Vec x_next;
  Vec ode_point;
  Vec eps_hat;
  Vec noise;  // the standard-normal draw used
};

SdeStepResult sde_step(const VelocityField& field, const Vec& x_t, double t,
                       double dt, double sigma_t, RngStream& rng, const Vec& cond);

// Full trajectory from x_1 at t=1 down to t=0. Sampling only: no gradients
// are recorded anywhere. For the SDE solver an RngStream and SdeConfig are
// required; the injected noise and per-step sigma are kept on the
// trajectory so trainers can reconstruct policy densities later.
Trajectory rollout(const VelocityField& field, SolverKind solver,
                   const TimeSchedule& schedule, const Vec& x_1, const Vec& cond,
                   RngStream* rng = nullptr, const SdeConfig* sde = nullptr);

// G independent rollouts. `parallel` selects the OpenMP kernel; results are
// bit-identical to the serial reference because member i always uses
// rng_base.fork(i) and writes to its own slot.
std::vector<Trajectory> rollout_group(const VelocityField& field, SolverKind solver,
                                      const TimeSchedule& schedule,
                                      const std::vector<Vec>& inits, const Vec& cond,
                                      const RngStream& rng_base, bool parallel,
                                      const SdeConfig* sde = nullptr);

// Serial reference implementation kept for testing the parallel kernel.
std::vector<Trajectory> rollout_group_serial(const VelocityField& field,
                                             SolverKind solver,
                                             const TimeSchedule& schedule,
                                             const std::vector<Vec>& inits,
                                             const Vec& cond, const RngStream& rng_base,
                                             const SdeConfig* sde = nullptr);

// Debug dump: one row per (trajectory, step) with columns
// traj_id, step, t, x[0..d), nfe_cumulative.
void dump_trajectories_csv(const std::vector<Trajectory>& trajs,
                           const std::string& path);

}  // namespace ngrpo

#endif  // NGRPO_SOLVERS_HPP_
