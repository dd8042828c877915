// SPDX-License-Identifier: Apache-2.0

#include "ngrpo/sde_baseline.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ngrpo/neighbor.hpp"

namespace ngrpo {

namespace {

// mu depends on the velocity only through v(x_prev, t_plus):
//   mu = x_prev - dt*v - (sigma^2/2t)(x_prev + (1-t)v)
// so d mu / d v = -(dt + (sigma^2/2t)(1-t)) =: -c_v.
double cv_coefficient(double t_plus, double dt, double sigma_t) {
  return dt + sigma_t * sigma_t / (2.0 * t_plus) * (1.0 - t_plus);
}

}  // namespace

GaussianPolicyEval gaussian_log_prob(const VelocityField& model, const Vec& x_t_plus,
                                     double t_plus, double dt, double sigma_t,
                                     const Vec& sample, const Vec& cond) {
  if (!(sigma_t > 0.0))
    throw std::invalid_argument("gaussian_log_prob: sigma_t must be > 0");
  if (!(t_plus > 0.0))
    throw std::invalid_argument("gaussian_log_prob: t_plus must be > 0");
  if (sample.size() != x_t_plus.size())
    throw std::invalid_argument("gaussian_log_prob: sample dimension mismatch");

  const Vec v = model.eval(x_t_plus, t_plus, cond);
  const double drift = sigma_t * sigma_t / (2.0 * t_plus);
  GaussianPolicyEval out;
  out.sigma_t = sigma_t;
  out.mu.resize(x_t_plus.size());
  for (std::size_t i = 0; i < x_t_plus.size(); ++i) {
    const double ode = x_t_plus[i] - dt * v[i];
    const double eps_hat = x_t_plus[i] + (1.0 - t_plus) * v[i];
    out.mu[i] = ode - drift * eps_hat;
  }
  const double d = static_cast<double>(sample.size());
  const double var = sigma_t * sigma_t;
  out.log_prob = -0.5 * d * std::log(2.0 * std::numbers::pi * var) -
                 squared_distance(sample, out.mu) / (2.0 * var);
  return out;
}

DriftResidual drift_residual(const VelocityField& model_new,
                             const VelocityField& model_old, const Vec& x_t, double t,
                             double sigma_t, const Vec& cond) {
  if (!(t > 0.0)) throw std::invalid_argument("drift_residual: t must be > 0");
  DriftResidual res;
  res.o_t.assign(x_t.size(), 0.0);
  if (sigma_t == 0.0) return res;
  const Vec v_new = model_new.eval(x_t, t, cond);
  const Vec v_old = model_old.eval(x_t, t, cond);
  const double drift = sigma_t * sigma_t / (2.0 * t);
  for (std::size_t i = 0; i < x_t.size(); ++i) {
    const double eh_new = x_t[i] + (1.0 - t) * v_new[i];
    const double eh_old = x_t[i] + (1.0 - t) * v_old[i];
    res.o_t[i] = drift * (eh_new - eh_old);
  }
  return res;
}

ParamGrad gaussian_nll_grad(const VelocityModel& model, const Vec& x_t_plus,
                            double t_plus, double dt, double sigma_t,
                            const Vec& sample, const Vec& cond) {
  const auto ev = gaussian_log_prob(model, x_t_plus, t_plus, dt, sigma_t, sample, cond);
  const double cv = cv_coefficient(t_plus, dt, sigma_t);
  Vec upstream(sample.size());
  for (std::size_t j = 0; j < sample.size(); ++j)
    upstream[j] = cv / (sigma_t * sigma_t) * (sample[j] - ev.mu[j]);
  return model.backward(x_t_plus, t_plus, cond, upstream).param_grad;
}

SdeGrpoTrainer::SdeGrpoTrainer(VelocityModel model, TrainLoopConfig cfg)
    : model_(std::move(model)),
      cfg_(cfg),
      schedule_(TimeSchedule::uniform_shifted(cfg.rollout_steps, cfg.schedule_shift)),
      sde_(SdeConfig::make(schedule_, cfg.sde_noise_scale, cfg.sde_eps_s,
                           cfg.sde_sigma_clip)),
      opt_(cfg.lr) {
  cfg_.validate();
}

std::vector<int> SdeGrpoTrainer::eligible_steps(int iter_index) const {
  const int hi = cfg_.rollout_steps - 1;  // steps into t > 0 carry noise
  if (cfg_.sde_window <= 0 || cfg_.sde_window >= hi) {
    std::vector<int> all;
    for (int j = 1; j <= hi; ++j) all.push_back(j);
    return all;
  }
  // Slide the window from the high-noise end (step 1) towards t = 0 across
  // the run.
  const int positions = hi - cfg_.sde_window + 1;
  const int pos = std::min<int>(
      positions - 1,
      iter_index * positions / std::max(1, cfg_.iterations));
  std::vector<int> out;
  for (int j = 1 + pos; j < 1 + pos + cfg_.sde_window; ++j) out.push_back(j);
  return out;
}

IterationMetrics SdeGrpoTrainer::iterate(int iter_index, const PromptSampler& prompts,
                                         const RewardFunction& reward,
                                         RngStream& rng) {
  const auto t_start = std::chrono::steady_clock::now();
  const VelocityModel model_old = model_;

  const Vec cond = prompts(rng);
  // Shared initial noise: every group member starts from the same eps*;
  // exploration comes from the per-step injected noise.
  Vec eps_star = gaussian_sample(rng, model_.data_dim());
  std::vector<Vec> inits(static_cast<std::size_t>(cfg_.group_size), eps_star);

  GroupRollout ro;
  ro.condition = cond;
  ro.schedule = schedule_;
  {
    RngStream group_base(rng.next_u64());
    ro.trajectories = rollout_group(model_old, SolverKind::sde, schedule_, inits, cond,
                                    group_base, cfg_.parallel_rollout, &sde_);
  }

  IterationMetrics m;
  m.iter = iter_index;
  m.variant = cfg_.sde_window > 0 ? "sde_windowed" : "sde";
  for (const auto& tr : ro.trajectories) {
    ro.rewards.rewards.push_back(reward(tr.terminal(), cond));
    m.nfe_old_total += tr.nfe;
  }
  if (!all_finite(ro.rewards.rewards))
    throw std::runtime_error("sde iteration: non-finite reward");
  const auto [r_mean, r_std] = mean_std(ro.rewards.rewards);
  m.mean_reward = r_mean;
  m.std_reward = r_std;

  const AdvantageVector adv = compute_advantages(ro.rewards, cfg_);
  const GrpoObjectiveConfig obj_cfg{cfg_.clip_eps, cfg_.beta_kl};

  const std::vector<int> eligible = eligible_steps(iter_index);
  const int k_steps = std::min<int>(cfg_.train_steps, static_cast<int>(eligible.size()));
  std::vector<int> picks =
      sample_without_replacement(0, static_cast<int>(eligible.size()) - 1, k_steps, rng);
  std::vector<int> steps;
  for (int p : picks) steps.push_back(eligible[static_cast<std::size_t>(p)]);

  ParamGrad loss_grad = model_.zero_grad();
  double obj_sum = 0.0;
  long clipped = 0, ratio_terms = 0;

  for (int step : steps) {
    Vec ratios(static_cast<std::size_t>(cfg_.group_size));
    Vec dlog(static_cast<std::size_t>(cfg_.group_size));
    std::vector<GaussianPolicyEval> evals_new(static_cast<std::size_t>(cfg_.group_size));
    for (int i = 0; i < cfg_.group_size; ++i) {
      const auto& tr = ro.trajectories[static_cast<std::size_t>(i)];
      const Vec& x_prev = tr.states[static_cast<std::size_t>(step - 1)];
      const Vec& sample = tr.states[static_cast<std::size_t>(step)];
      const double t_plus = schedule_.times[static_cast<std::size_t>(step - 1)];
      const double dt = t_plus - schedule_.times[static_cast<std::size_t>(step)];
      const double sigma = tr.sigma_used[static_cast<std::size_t>(step - 1)];
      const auto new_eval =
          gaussian_log_prob(model_, x_prev, t_plus, dt, sigma, sample, cond);
      const auto old_eval =
          gaussian_log_prob(model_old, x_prev, t_plus, dt, sigma, sample, cond);
      dlog[static_cast<std::size_t>(i)] = new_eval.log_prob - old_eval.log_prob;
      ratios[static_cast<std::size_t>(i)] =
          std::exp(dlog[static_cast<std::size_t>(i)]);
      evals_new[static_cast<std::size_t>(i)] = new_eval;
      m.nfe_theta_total += 1;
    }
    const double kl_estimate =
        cfg_.beta_kl > 0.0
            ? dot(dlog, dlog) / static_cast<double>(cfg_.group_size)
            : 0.0;
    const ClippedObjective obj = clipped_objective(adv, ratios, obj_cfg, kl_estimate);
    obj_sum += obj.value;
    for (bool c : obj.clipped) clipped += c ? 1 : 0;
    ratio_terms += static_cast<long>(ratios.size());

    // d J / d theta = sum_i w_i * d logpi_new_i / d theta with
    // d logpi / d theta = <-(c_v / sigma^2)(sample - mu), dv/dtheta> and
    // w_i the clipped-objective mask plus the KL surrogate term.
    const Vec dratio = clipped_objective_dratio(adv, ratios, obj_cfg);
    for (int i = 0; i < cfg_.group_size; ++i) {
      double w = dratio[static_cast<std::size_t>(i)] *
                 ratios[static_cast<std::size_t>(i)];
      if (cfg_.beta_kl > 0.0)
        w += cfg_.beta_kl * 2.0 * dlog[static_cast<std::size_t>(i)] /
             static_cast<double>(cfg_.group_size);
      if (w == 0.0) continue;
      const auto& tr = ro.trajectories[static_cast<std::size_t>(i)];
      const Vec& x_prev = tr.states[static_cast<std::size_t>(step - 1)];
      const Vec& sample = tr.states[static_cast<std::size_t>(step)];
      const double t_plus = schedule_.times[static_cast<std::size_t>(step - 1)];
      const double dt = t_plus - schedule_.times[static_cast<std::size_t>(step)];
      const double sigma = tr.sigma_used[static_cast<std::size_t>(step - 1)];
      const double cv = cv_coefficient(t_plus, dt, sigma);
      const auto& ev = evals_new[static_cast<std::size_t>(i)];
      Vec upstream(sample.size());
      // Loss convention: gradient of -J.
      for (std::size_t j = 0; j < sample.size(); ++j)
        upstream[j] = w * cv / (sigma * sigma) * (sample[j] - ev.mu[j]);
      auto bw = model_.backward(x_prev, t_plus, cond, upstream);
      loss_grad.add_scaled(bw.param_grad, 1.0);
    }
  }

  if (!loss_grad.all_finite())
    throw std::runtime_error("sde iteration: non-finite gradient (|g|max=" +
                             std::to_string(loss_grad.max_abs()) + ")");
  loss_grad.clip_norm(cfg_.max_grad_norm);
  if (cfg_.lr != 0.0) opt_.descend(model_, loss_grad);

  m.objective = obj_sum / static_cast<double>(steps.size());
  m.frac_clipped =
      ratio_terms > 0 ? static_cast<double>(clipped) / static_cast<double>(ratio_terms) : 0.0;
  m.nfe_old = static_cast<double>(cfg_.rollout_steps);
  m.nfe_theta = static_cast<double>(k_steps);  // B = G for the baseline
  m.wall_ms = std::chrono::duration<double, std::milli>(
                  std::chrono::steady_clock::now() - t_start)
                  .count();
  return m;
}

std::vector<SdeSampleRecord> records_from_trajectory(const Trajectory& traj,
                                                     const Vec& cond,
                                                     double advantage) {
  std::vector<SdeSampleRecord> out;
  const int T = static_cast<int>(traj.states.size()) - 1;
  for (int step = 1; step <= T; ++step) {
    const double sigma = traj.sigma_used.at(static_cast<std::size_t>(step - 1));
    if (sigma == 0.0) continue;  // deterministic step, no policy density
    SdeSampleRecord r;
    r.x_prev = traj.states[static_cast<std::size_t>(step - 1)];
    r.t_plus = traj.times[static_cast<std::size_t>(step - 1)];
    r.dt = r.t_plus - traj.times[static_cast<std::size_t>(step)];
    r.sigma = sigma;
    r.noise = traj.injected_noise.at(static_cast<std::size_t>(step - 1));
    r.sample = traj.states[static_cast<std::size_t>(step)];
    r.cond = cond;
    r.advantage = advantage;
    out.push_back(std::move(r));
  }
  return out;
}

ContrastiveReport contrastive_equivalence_check(
    const VelocityModel& model_new, const VelocityModel& model_old,
    const std::vector<SdeSampleRecord>& batch) {
  if (batch.empty())
    throw std::invalid_argument("contrastive_equivalence_check: empty batch");
  ContrastiveReport rep;

  ParamGrad grad_nll = model_new.zero_grad();      // route one
  ParamGrad grad_residual = model_new.zero_grad(); // route two
  ParamGrad grad_dropped = model_new.zero_grad();  // residual term omitted

  for (const auto& r : batch) {
    if (r.noise.empty())
      throw std::invalid_argument("contrastive_equivalence_check: missing noise record");
    const double var = r.sigma * r.sigma;
    const double d = static_cast<double>(r.sample.size());

    // Exact NLL under the new model.
    const auto ev = gaussian_log_prob(model_new, r.x_prev, r.t_plus, r.dt, r.sigma,
                                      r.sample, r.cond);

    // Residual form: x_tilde - x_ode_new + o, assembled from separately
    // computed pieces (old ODE point, recorded noise, drift residual).
    const Vec ode_old = euler_step(model_old, r.x_prev, r.t_plus, r.dt, r.cond);
    const Vec ode_new = euler_step(model_new, r.x_prev, r.t_plus, r.dt, r.cond);
    const DriftResidual o =
        drift_residual(model_new, model_old, r.x_prev, r.t_plus, r.sigma, r.cond);
    Vec residual(r.sample.size());
    for (std::size_t j = 0; j < residual.size(); ++j)
      residual[j] = (ode_old[j] + r.sigma * r.noise[j]) - ode_new[j] + o.o_t[j];

    const double nll = -ev.log_prob;
    const double mse_form = dot(residual, residual) / (2.0 * var) +
                            0.5 * d * std::log(2.0 * std::numbers::pi * var);
    rep.max_identity_gap = std::max(rep.max_identity_gap, std::abs(nll - mse_form));
    rep.residual_norm = std::max(rep.residual_norm, norm2(o.o_t));

    const double cv = cv_coefficient(r.t_plus, r.dt, r.sigma);

    // Route one: d/dtheta [A * logpi] through the policy mean.
    Vec u1(r.sample.size());
    for (std::size_t j = 0; j < u1.size(); ++j)
      u1[j] = -r.advantage * cv / var * (r.sample[j] - ev.mu[j]);
    grad_nll.add_scaled(
        model_new.backward(r.x_prev, r.t_plus, r.cond, u1).param_grad, 1.0);

    // Route two: d/dtheta [-A/(2 sigma^2) ||residual||^2] with the Euler
    // and drift contributions accumulated as separate backward passes.
    Vec u_euler(r.sample.size());
    Vec u_drift(r.sample.size());
    const double drift_coef = var / (2.0 * r.t_plus) * (1.0 - r.t_plus);
    for (std::size_t j = 0; j < residual.size(); ++j) {
      const double base = -r.advantage / var * residual[j];
      u_euler[j] = base * r.dt;
      u_drift[j] = base * drift_coef;
    }
    grad_residual.add_scaled(
        model_new.backward(r.x_prev, r.t_plus, r.cond, u_euler).param_grad, 1.0);
    grad_residual.add_scaled(
        model_new.backward(r.x_prev, r.t_plus, r.cond, u_drift).param_grad, 1.0);

    // Residual dropped: targets are just the perturbed old ODE points.
    Vec u3(r.sample.size());
    for (std::size_t j = 0; j < u3.size(); ++j)
      u3[j] = -r.advantage / var * (residual[j] - o.o_t[j]) * r.dt;
    grad_dropped.add_scaled(
        model_new.backward(r.x_prev, r.t_plus, r.cond, u3).param_grad, 1.0);
  }

  // Elementwise relative agreement of the two routes.
  double rel = 0.0;
  for (std::size_t l = 0; l < grad_nll.weights.size(); ++l) {
    for (std::size_t i = 0; i < grad_nll.weights[l].data.size(); ++i) {
      const double a = grad_nll.weights[l].data[i];
      const double b = grad_residual.weights[l].data[i];
      rel = std::max(rel, std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12}));
    }
    for (std::size_t i = 0; i < grad_nll.biases[l].size(); ++i) {
      const double a = grad_nll.biases[l][i];
      const double b = grad_residual.biases[l][i];
      rel = std::max(rel, std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12}));
    }
  }
  rep.grad_dual_route_rel_err = rel;

  grad_dropped.add_scaled(grad_nll, -1.0);
  rep.dropped_residual_gap = grad_dropped.max_abs();
  rep.bound_constant =
      rep.dropped_residual_gap / std::max(rep.residual_norm, 1e-300);
  return rep;
}

}  // namespace ngrpo
