// SPDX-License-Identifier: Apache-2.0

#include "ngrpo/solvers.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ngrpo {

TimeSchedule TimeSchedule::uniform(int steps) {
  return uniform_shifted(steps, 1.0);
}

TimeSchedule TimeSchedule::uniform_shifted(int steps, double shift) {
  if (steps < 1) throw std::invalid_argument("TimeSchedule: steps must be >= 1");
  if (!(shift > 0.0)) throw std::invalid_argument("TimeSchedule: shift must be > 0");
  TimeSchedule s;
  s.times.resize(static_cast<std::size_t>(steps) + 1);
  for (int j = 0; j <= steps; ++j) {
    const double u = static_cast<double>(steps - j) / static_cast<double>(steps);
    s.times[static_cast<std::size_t>(j)] =
        (shift == 1.0) ? u : shift * u / (1.0 + (shift - 1.0) * u);
  }
  s.times.front() = 1.0;
  s.times.back() = 0.0;
  s.validate();
  return s;
}

void TimeSchedule::validate() const {
  if (times.size() < 2) throw std::invalid_argument("TimeSchedule: need at least 2 points");
  if (times.front() != 1.0 || times.back() != 0.0)
    throw std::invalid_argument("TimeSchedule: endpoints must be exactly 1 and 0");
  for (std::size_t j = 1; j < times.size(); ++j)
    if (!(times[j] < times[j - 1]))
      throw std::invalid_argument("TimeSchedule: times must be strictly decreasing");
}

const char* solver_name(SolverKind k) {
  switch (k) {
    case SolverKind::euler: return "euler";
    case SolverKind::dpmpp: return "dpmpp";
    case SolverKind::sde: return "sde";
  }
  return "?";
}

SolverKind solver_from_name(const std::string& name) {
  if (name == "euler") return SolverKind::euler;
  if (name == "dpmpp") return SolverKind::dpmpp;
  if (name == "sde") return SolverKind::sde;
  throw std::invalid_argument("unknown solver: " + name);
}

SdeConfig SdeConfig::make(const TimeSchedule& schedule, double scale, double eps_s,
                          double clip_max) {
  SdeConfig cfg;
  const int T = schedule.steps();
  cfg.sigma.resize(static_cast<std::size_t>(T), 0.0);
  for (int j = 1; j <= T; ++j) {
    if (j == T) break;  // final step into t = 0 stays deterministic
    const double t = schedule.times[static_cast<std::size_t>(j - 1)];
    const double dt = t - schedule.times[static_cast<std::size_t>(j)];
    double s = scale * std::sqrt(t / (1.0 - t + eps_s)) * std::sqrt(dt);
    s = std::min(std::max(s, 0.0), clip_max);
    cfg.sigma[static_cast<std::size_t>(j - 1)] = s;
  }
  return cfg;
}

Vec euler_step(const VelocityField& field, const Vec& x_t, double t, double dt,
               const Vec& cond) {
  if (!(dt > 0.0)) throw std::invalid_argument("euler_step: dt must be > 0");
  const Vec v = field.eval(x_t, t, cond);
  Vec out(x_t.size());
  for (std::size_t i = 0; i < x_t.size(); ++i) out[i] = x_t[i] - dt * v[i];
  return out;
}

Vec dpmpp_step(const VelocityField& field, DpmppHistory& history, const Vec& x_t,
               double t, double dt, const Vec& cond) {
  if (!(dt > 0.0)) throw std::invalid_argument("dpmpp_step: dt must be > 0");
  const double r = t - dt;
  const Vec v = field.eval(x_t, t, cond);
  Vec x0_hat(x_t.size());
  for (std::size_t i = 0; i < x_t.size(); ++i) x0_hat[i] = x_t[i] - t * v[i];

  Vec out(x_t.size());
  if (!history.has_prev) {
    // No history yet: first-order step (identical to Euler on this path).
    for (std::size_t i = 0; i < x_t.size(); ++i) out[i] = x_t[i] - dt * v[i];
  } else {
    const double ratio = r / t;
    // c = -r*log(r/t) + r - t; the r->0 limit is -t.
    const double c = (r > 0.0 ? -r * std::log(ratio) : 0.0) + r - t;
    const double denom = t - history.t_prev;  // negative: prev time is larger
    for (std::size_t i = 0; i < x_t.size(); ++i) {
      const double slope = (x0_hat[i] - history.x0_prev[i]) / denom;
      out[i] = ratio * x_t[i] + (1.0 - ratio) * x0_hat[i] + c * slope;
    }
  }
  history.has_prev = true;
  history.t_prev = t;
  history.x0_prev = std::move(x0_hat);
  return out;
}

SdeStepResult sde_step(const VelocityField& field, const Vec& x_t, double t,
                       double dt, double sigma_t, RngStream& rng, const Vec& cond) {
  if (!(dt > 0.0)) throw std::invalid_argument("sde_step: dt must be > 0");
  if (sigma_t > 0.0 && !(t > 0.0))
    throw std::invalid_argument("sde_step: sigma_t > 0 requires t > 0");
  const Vec v = field.eval(x_t, t, cond);
  SdeStepResult res;
  res.ode_point.resize(x_t.size());
  res.eps_hat.resize(x_t.size());
  for (std::size_t i = 0; i < x_t.size(); ++i) {
    res.ode_point[i] = x_t[i] - dt * v[i];
    res.eps_hat[i] = x_t[i] + (1.0 - t) * v[i];
  }
  if (sigma_t == 0.0) {
    res.x_next = res.ode_point;
    return res;
  }
  res.noise = gaussian_sample(rng, static_cast<int>(x_t.size()));
  const double drift = sigma_t * sigma_t / (2.0 * t);
  res.x_next.resize(x_t.size());
  for (std::size_t i = 0; i < x_t.size(); ++i)
    res.x_next[i] = res.ode_point[i] - drift * res.eps_hat[i] + sigma_t * res.noise[i];
  return res;
}

Trajectory rollout(const VelocityField& field, SolverKind solver,
                   const TimeSchedule& schedule, const Vec& x_1, const Vec& cond,
                   RngStream* rng, const SdeConfig* sde) {
  schedule.validate();
  if (static_cast<int>(x_1.size()) != field.data_dim())
    throw std::invalid_argument("rollout: x_1 dimension mismatch");
  const int T = schedule.steps();
  if (solver == SolverKind::sde) {
    if (rng == nullptr || sde == nullptr)
      throw std::invalid_argument("rollout: sde solver needs rng and SdeConfig");
    if (static_cast<int>(sde->sigma.size()) != T)
      throw std::invalid_argument("rollout: SdeConfig length mismatch");
  }

  Trajectory traj;
  traj.times = schedule.times;
  traj.states.reserve(static_cast<std::size_t>(T) + 1);
  traj.states.push_back(x_1);

  DpmppHistory hist;
  Vec x = x_1;
  for (int j = 1; j <= T; ++j) {
    const double t = schedule.times[static_cast<std::size_t>(j - 1)];
    const double dt = t - schedule.times[static_cast<std::size_t>(j)];
    switch (solver) {
      case SolverKind::euler:
        x = euler_step(field, x, t, dt, cond);
        break;
      case SolverKind::dpmpp:
        x = dpmpp_step(field, hist, x, t, dt, cond);
        break;
      case SolverKind::sde: {
        auto r = sde_step(field, x, t, dt, sde->sigma[static_cast<std::size_t>(j - 1)],
                          *rng, cond);
        traj.injected_noise.push_back(std::move(r.noise));
        traj.sigma_used.push_back(sde->sigma[static_cast<std::size_t>(j - 1)]);
        x = std::move(r.x_next);
        break;
      }
    }
    traj.nfe += 1;  // every step evaluates the field exactly once
    traj.states.push_back(x);
  }
  return traj;
}

std::vector<Trajectory> rollout_group_serial(const VelocityField& field,
                                             SolverKind solver,
                                             const TimeSchedule& schedule,
                                             const std::vector<Vec>& inits,
                                             const Vec& cond, const RngStream& rng_base,
                                             const SdeConfig* sde) {
  std::vector<Trajectory> out(inits.size());
  for (std::size_t i = 0; i < inits.size(); ++i) {
    RngStream member_rng = rng_base.fork(i);
    out[i] = rollout(field, solver, schedule, inits[i], cond, &member_rng, sde);
  }
  return out;
}

std::vector<Trajectory> rollout_group(const VelocityField& field, SolverKind solver,
                                      const TimeSchedule& schedule,
                                      const std::vector<Vec>& inits, const Vec& cond,
                                      const RngStream& rng_base, bool parallel,
                                      const SdeConfig* sde) {
#ifdef _OPENMP
  if (parallel) {
    std::vector<Trajectory> out(inits.size());
    const int n = static_cast<int>(inits.size());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      RngStream member_rng = rng_base.fork(static_cast<std::uint64_t>(i));
      out[static_cast<std::size_t>(i)] =
          rollout(field, solver, schedule, inits[static_cast<std::size_t>(i)], cond,
                  &member_rng, sde);
    }
    return out;
  }
#else
  (void)parallel;
#endif
  return rollout_group_serial(field, solver, schedule, inits, cond, rng_base, sde);
}

void dump_trajectories_csv(const std::vector<Trajectory>& trajs,
                           const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("dump_trajectories_csv: cannot open " + path);
  const std::size_t d = trajs.empty() ? 0 : trajs.front().states.front().size();
  out << "traj_id,step,t";
  for (std::size_t i = 0; i < d; ++i) out << ",x" << i;
  out << ",nfe_cumulative\n";
  char buf[64];
  for (std::size_t id = 0; id < trajs.size(); ++id) {
    const auto& tr = trajs[id];
    for (std::size_t j = 0; j < tr.states.size(); ++j) {
      out << id << "," << j;
      std::snprintf(buf, sizeof(buf), ",%.17g", tr.times[j]);
      out << buf;
      for (double x : tr.states[j]) {
        std::snprintf(buf, sizeof(buf), ",%.17g", x);
        out << buf;
      }
      // the first row of a trajectory is the initial state, before any step
      out << "," << (j == 0 ? 0 : static_cast<long>(j)) << "\n";
    }
  }
}

}  // namespace ngrpo
