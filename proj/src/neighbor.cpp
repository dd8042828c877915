// SPDX-License-Identifier: Apache-2.0

#include "ngrpo/neighbor.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace ngrpo {

void TrainLoopConfig::validate() const {
  if (group_size < 2) throw std::invalid_argument("config: group_size must be >= 2");
  if (anchors_per_iter < 1 || anchors_per_iter > group_size)
    throw std::invalid_argument("config: need 1 <= anchors_per_iter <= group_size");
  if (rollout_steps < 2)
    throw std::invalid_argument("config: rollout_steps must be >= 2");
  if (train_steps < 1 || train_steps > rollout_steps - 1)
    throw std::invalid_argument("config: need 1 <= train_steps <= rollout_steps - 1");
  if (!(sigma > 0.0) || sigma > 1.0)
    throw std::invalid_argument("config: sigma must be in (0, 1]");
  if (!(p > 0.0) || p > 2.0) throw std::invalid_argument("config: p must be in (0, 2]");
  if (!(clip_eps > 0.0)) throw std::invalid_argument("config: clip_eps must be > 0");
  if (beta_kl < 0.0) throw std::invalid_argument("config: beta_kl must be >= 0");
  if (iterations < 1) throw std::invalid_argument("config: iterations must be >= 1");
  if (leap_temperature < 0.0)
    throw std::invalid_argument("config: leap_temperature must be >= 0 (0 = auto)");
  if (max_grad_norm < 0.0)
    throw std::invalid_argument("config: max_grad_norm must be >= 0");
  if (sde_window < 0 || sde_window > rollout_steps - 1)
    throw std::invalid_argument("config: sde_window out of range");
}

AdvantageVector compute_advantages(const RewardGroup& rewards,
                                   const TrainLoopConfig& cfg) {
  if (cfg.advantage_mode == AdvantageMode::quasi_norm)
    return advantages_quasinorm(rewards, cfg.p);
  return advantages_standard(rewards, cfg.sample_std);
}

std::vector<int> sample_without_replacement(int lo, int hi, int k, RngStream& rng) {
  const int n = hi - lo + 1;
  if (k < 0 || k > n)
    throw std::invalid_argument("sample_without_replacement: k out of range");
  std::vector<int> pool(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = lo + i;
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const int remaining = n - i;
    const int j = i + static_cast<int>(rng.uniform01() * static_cast<double>(remaining));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    out.push_back(pool[static_cast<std::size_t>(i)]);
  }
  return out;
}

NoiseGroup perturb_noise(const Vec& eps_star, double sigma, int group_size,
                         RngStream& rng) {
  if (!(sigma > 0.0) || sigma > 1.0)
    throw std::invalid_argument("perturb_noise: sigma must be in (0, 1]");
  if (group_size < 2)
    throw std::invalid_argument("perturb_noise: group_size must be >= 2");
  NoiseGroup g;
  g.eps_star = eps_star;
  g.sigma = sigma;
  const double keep = std::sqrt(1.0 - sigma * sigma);
  g.members.reserve(static_cast<std::size_t>(group_size));
  for (int i = 0; i < group_size; ++i) {
    Vec delta = gaussian_sample(rng, static_cast<int>(eps_star.size()));
    Vec m(eps_star.size());
    for (std::size_t j = 0; j < eps_star.size(); ++j)
      m[j] = keep * eps_star[j] + sigma * delta[j];
    g.members.push_back(std::move(m));
  }
  return g;
}

std::vector<Vec> GroupRollout::states_at(int step) const {
  std::vector<Vec> out;
  out.reserve(trajectories.size());
  for (const auto& tr : trajectories)
    out.push_back(tr.states.at(static_cast<std::size_t>(step)));
  return out;
}

double auto_leap_temperature(const std::vector<Vec>& group_states) {
  if (group_states.empty())
    throw std::invalid_argument("auto_leap_temperature: empty group");
  const std::size_t d = group_states.front().size();
  Vec mean(d, 0.0);
  for (const auto& s : group_states) axpy(1.0, s, mean);
  for (auto& v : mean) v /= static_cast<double>(group_states.size());
  double msd = 0.0;
  for (const auto& s : group_states) msd += squared_distance(s, mean);
  msd /= static_cast<double>(group_states.size());
  return std::max(2.0 * msd, 1e-12);
}

LeapPolicy leap_policy(const std::vector<Vec>& group_states, const Vec& anchor,
                       double temperature) {
  if (group_states.empty()) throw std::invalid_argument("leap_policy: empty group");
  if (!(temperature > 0.0))
    throw std::invalid_argument("leap_policy: temperature must be > 0");
  Vec d(group_states.size());
  for (std::size_t i = 0; i < group_states.size(); ++i)
    d[i] = squared_distance(group_states[i], anchor) / temperature;
  LeapPolicy p;
  p.log_probs = log_softmax_neg_sqdist(d);
  p.probs.resize(p.log_probs.size());
  for (std::size_t i = 0; i < p.probs.size(); ++i) p.probs[i] = std::exp(p.log_probs[i]);
  return p;
}

namespace {

struct StepContext {
  std::vector<Vec> candidates;  // stored states at times[step]
  Vec x_prev;                   // anchor predecessor at times[step-1]
  double t_prev = 0.0;
  double dt = 0.0;
};

StepContext step_context(const GroupRollout& rollout, int anchor_index, int step) {
  const int T = rollout.schedule.steps();
  if (anchor_index < 0 || anchor_index >= rollout.group_size())
    throw std::invalid_argument("anchor index out of range");
  if (step < 1 || step > T) throw std::invalid_argument("step out of range");
  StepContext ctx;
  ctx.candidates = rollout.states_at(step);
  const auto& anchor_traj = rollout.trajectories[static_cast<std::size_t>(anchor_index)];
  ctx.x_prev = anchor_traj.states[static_cast<std::size_t>(step - 1)];
  ctx.t_prev = rollout.schedule.times[static_cast<std::size_t>(step - 1)];
  ctx.dt = ctx.t_prev - rollout.schedule.times[static_cast<std::size_t>(step)];
  return ctx;
}

}  // namespace

Vec anchor_ratios(const GroupRollout& rollout, int anchor_index, int step,
                  const VelocityModel& model_new, double temperature) {
  auto ctx = step_context(rollout, anchor_index, step);
  if (temperature <= 0.0) temperature = auto_leap_temperature(ctx.candidates);
  const Vec anchor_new =
      euler_step(model_new, ctx.x_prev, ctx.t_prev, ctx.dt, rollout.condition);
  const Vec& anchor_old =
      rollout.trajectories[static_cast<std::size_t>(anchor_index)]
          .states[static_cast<std::size_t>(step)];
  const LeapPolicy pol_new = leap_policy(ctx.candidates, anchor_new, temperature);
  const LeapPolicy pol_old = leap_policy(ctx.candidates, anchor_old, temperature);
  Vec ratios(pol_new.log_probs.size());
  for (std::size_t i = 0; i < ratios.size(); ++i)
    ratios[i] = std::exp(pol_new.log_probs[i] - pol_old.log_probs[i]);
  return ratios;
}

AnchorStepObjective anchor_step_objective(const GroupRollout& rollout,
                                          int anchor_index, int step,
                                          const VelocityModel& model_new,
                                          const AdvantageVector& adv,
                                          const GrpoObjectiveConfig& cfg,
                                          double temperature,
                                          bool include_anchor_term, bool want_grad) {
  auto ctx = step_context(rollout, anchor_index, step);
  if (temperature <= 0.0) temperature = auto_leap_temperature(ctx.candidates);
  const int G = rollout.group_size();
  if (static_cast<int>(adv.values.size()) != G)
    throw std::invalid_argument("anchor_step_objective: advantage size mismatch");

  const Vec anchor_new =
      euler_step(model_new, ctx.x_prev, ctx.t_prev, ctx.dt, rollout.condition);
  const Vec& anchor_old =
      rollout.trajectories[static_cast<std::size_t>(anchor_index)]
          .states[static_cast<std::size_t>(step)];
  const LeapPolicy pol_new = leap_policy(ctx.candidates, anchor_new, temperature);
  const LeapPolicy pol_old = leap_policy(ctx.candidates, anchor_old, temperature);

  AdvantageVector adv_used = adv;
  if (!include_anchor_term) adv_used.values[static_cast<std::size_t>(anchor_index)] = 0.0;

  AnchorStepObjective out;
  out.ratios.resize(static_cast<std::size_t>(G));
  Vec dlog(static_cast<std::size_t>(G));
  for (int i = 0; i < G; ++i) {
    dlog[static_cast<std::size_t>(i)] =
        pol_new.log_probs[static_cast<std::size_t>(i)] -
        pol_old.log_probs[static_cast<std::size_t>(i)];
    out.ratios[static_cast<std::size_t>(i)] =
        std::exp(dlog[static_cast<std::size_t>(i)]);
  }

  // Squared-difference surrogate on the log-policies, off at beta_kl = 0.
  const double kl_estimate = cfg.beta_kl > 0.0
                                 ? dot(dlog, dlog) / static_cast<double>(G)
                                 : 0.0;
  const ClippedObjective obj = clipped_objective(adv_used, out.ratios, cfg, kl_estimate);
  out.value = obj.value;
  for (bool c : obj.clipped) out.clipped_count += c ? 1 : 0;
  if (!want_grad) return out;

  // dJ/d(anchor_new) = sum_i w_i * dlogpi_i/dy with
  // dlogpi_i/dy = (2/tau) (c_i - sum_m pi_m c_m),
  // w_i = mask_i * rho_i for the clipped objective plus the KL surrogate.
  const Vec dratio = clipped_objective_dratio(adv_used, out.ratios, cfg);
  Vec pol_mean(anchor_new.size(), 0.0);
  for (int i = 0; i < G; ++i)
    axpy(pol_new.probs[static_cast<std::size_t>(i)],
         ctx.candidates[static_cast<std::size_t>(i)], pol_mean);
  Vec dj_dy(anchor_new.size(), 0.0);
  for (int i = 0; i < G; ++i) {
    double w = dratio[static_cast<std::size_t>(i)] *
               out.ratios[static_cast<std::size_t>(i)];
    if (cfg.beta_kl > 0.0)
      w += cfg.beta_kl * 2.0 * dlog[static_cast<std::size_t>(i)] /
           static_cast<double>(G);
    w *= 2.0 / temperature;
    if (w == 0.0) continue;
    const Vec& ci = ctx.candidates[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < dj_dy.size(); ++j)
      dj_dy[j] += w * (ci[j] - pol_mean[j]);
  }
  // y = x_prev - dt * v(x_prev, t_prev), so dJ/dtheta = -dt * <dJ/dy, dv/dtheta>.
  auto bw = model_new.backward(ctx.x_prev, ctx.t_prev, rollout.condition, dj_dy);
  bw.param_grad.scale(-ctx.dt);
  out.grad = std::move(bw.param_grad);
  return out;
}

NeighborGrpoTrainer::NeighborGrpoTrainer(VelocityModel model, TrainLoopConfig cfg)
    : model_(std::move(model)),
      cfg_(cfg),
      schedule_(TimeSchedule::uniform_shifted(cfg.rollout_steps, cfg.schedule_shift)),
      opt_(cfg.lr) {
  cfg_.validate();
  if (cfg_.rollout_solver == SolverKind::sde)
    throw std::invalid_argument("neighbor trainer uses deterministic rollouts");
}

IterationMetrics NeighborGrpoTrainer::iterate(int iter_index,
                                              const PromptSampler& prompts,
                                              const RewardFunction& reward,
                                              RngStream& rng) {
  const auto t_start = std::chrono::steady_clock::now();
  const VelocityModel model_old = model_;  // snapshot of theta_old

  const Vec cond = prompts(rng);
  Vec eps_star = gaussian_sample(rng, model_.data_dim());
  NoiseGroup noise = perturb_noise(eps_star, cfg_.sigma, cfg_.group_size, rng);

  GroupRollout ro;
  ro.condition = cond;
  ro.schedule = schedule_;
  {
    RngStream group_base(rng.next_u64());
    ro.trajectories = rollout_group(model_old, cfg_.rollout_solver, schedule_,
                                    noise.members, cond, group_base,
                                    cfg_.parallel_rollout, nullptr);
  }

  IterationMetrics m;
  m.iter = iter_index;
  m.variant = "neighbor";
  for (const auto& tr : ro.trajectories) {
    ro.rewards.rewards.push_back(reward(tr.terminal(), cond));
    m.nfe_old_total += tr.nfe;
  }
  if (!all_finite(ro.rewards.rewards))
    throw std::runtime_error("neighbor iteration: non-finite reward");
  const auto [r_mean, r_std] = mean_std(ro.rewards.rewards);
  m.mean_reward = r_mean;
  m.std_reward = r_std;

  const AdvantageVector adv = compute_advantages(ro.rewards, cfg_);
  const GrpoObjectiveConfig obj_cfg{cfg_.clip_eps, cfg_.beta_kl};

  const std::vector<int> anchors =
      sample_without_replacement(0, cfg_.group_size - 1, cfg_.anchors_per_iter, rng);
  std::vector<int> shared_steps;
  if (cfg_.shared_step_set)
    shared_steps =
        sample_without_replacement(1, cfg_.rollout_steps - 1, cfg_.train_steps, rng);

  ParamGrad loss_grad = model_.zero_grad();
  ParamGrad accumulated = model_.zero_grad();
  double obj_sum = 0.0;
  long clipped = 0, ratio_terms = 0;

  for (int anchor : anchors) {
    const std::vector<int> steps =
        cfg_.shared_step_set
            ? shared_steps
            : sample_without_replacement(1, cfg_.rollout_steps - 1, cfg_.train_steps, rng);
    loss_grad.set_zero();
    for (int step : steps) {
      auto res = anchor_step_objective(ro, anchor, step, model_, adv, obj_cfg,
                                       cfg_.leap_temperature, cfg_.include_anchor_term);
      obj_sum += res.value;
      clipped += res.clipped_count;
      ratio_terms += static_cast<long>(res.ratios.size());
      // Ascent on the objective == descent on its negation.
      loss_grad.add_scaled(res.grad, -1.0);
      m.nfe_theta_total += 1;
    }
    if (!loss_grad.all_finite())
      throw std::runtime_error("neighbor iteration: non-finite gradient (|g|max=" +
                               std::to_string(loss_grad.max_abs()) + ")");
    if (cfg_.per_anchor_update) {
      loss_grad.clip_norm(cfg_.max_grad_norm);
      if (cfg_.lr != 0.0) opt_.descend(model_, loss_grad);
    } else {
      accumulated.add_scaled(loss_grad, 1.0);
    }
  }
  if (!cfg_.per_anchor_update && cfg_.lr != 0.0) {
    accumulated.clip_norm(cfg_.max_grad_norm);
    opt_.descend(model_, accumulated);
  }

  const double pairs = static_cast<double>(anchors.size() * cfg_.train_steps);
  m.objective = obj_sum / pairs;
  m.frac_clipped =
      ratio_terms > 0 ? static_cast<double>(clipped) / static_cast<double>(ratio_terms) : 0.0;
  m.nfe_old = static_cast<double>(cfg_.rollout_steps);
  m.nfe_theta = static_cast<double>(cfg_.anchors_per_iter) /
                static_cast<double>(cfg_.group_size) *
                static_cast<double>(cfg_.train_steps);
  m.wall_ms = std::chrono::duration<double, std::milli>(
                  std::chrono::steady_clock::now() - t_start)
                  .count();
  return m;
}

AnchorEstimatorReport anchor_estimator_check(const GroupRollout& rollout,
                                             const VelocityModel& model_new,
                                             const std::vector<int>& steps,
                                             const AdvantageVector& adv,
                                             const GrpoObjectiveConfig& cfg,
                                             int mc_draws, RngStream& rng) {
  const int G = rollout.group_size();
  AnchorEstimatorReport rep;

  Vec singles(static_cast<std::size_t>(G), 0.0);
  for (int k = 0; k < G; ++k)
    for (int step : steps)
      singles[static_cast<std::size_t>(k)] +=
          anchor_step_objective(rollout, k, step, model_new, adv, cfg, 1.0, true,
                                /*want_grad=*/false)
              .value;

  // Route one: all anchors accumulated in a single pass.
  double full = 0.0;
  for (int k = 0; k < G; ++k) full += singles[static_cast<std::size_t>(k)];
  rep.full_objective = full / static_cast<double>(G);
  // Route two: average the separately stored single-anchor values.
  double acc = 0.0;
  for (double s : singles) acc += s / static_cast<double>(G);
  rep.mean_of_singles = acc;

  if (mc_draws > 0) {
    double sum = 0.0, sumsq = 0.0;
    for (int d = 0; d < mc_draws; ++d) {
      const int k = static_cast<int>(rng.uniform01() * static_cast<double>(G));
      const double v = singles[static_cast<std::size_t>(k)];
      sum += v;
      sumsq += v * v;
    }
    const double n = static_cast<double>(mc_draws);
    rep.mc_mean = sum / n;
    const double var = std::max(0.0, sumsq / n - rep.mc_mean * rep.mc_mean);
    rep.mc_std_error = std::sqrt(var / n);
    rep.mc_draws = mc_draws;
  }

  // Accumulated gradient under two anchor orderings (forward and reversed).
  ParamGrad g_fwd = model_new.zero_grad();
  ParamGrad g_rev = model_new.zero_grad();
  for (int k = 0; k < G; ++k)
    for (int step : steps)
      g_fwd.add_scaled(
          anchor_step_objective(rollout, k, step, model_new, adv, cfg).grad, 1.0);
  for (int k = G - 1; k >= 0; --k)
    for (int step : steps)
      g_rev.add_scaled(
          anchor_step_objective(rollout, k, step, model_new, adv, cfg).grad, 1.0);
  g_rev.add_scaled(g_fwd, -1.0);
  rep.max_grad_permutation_gap = g_rev.max_abs();
  return rep;
}

}  // namespace ngrpo
