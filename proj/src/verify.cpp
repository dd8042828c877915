// SPDX-License-Identifier: Apache-2.0

#include "ngrpo/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ngrpo/experiment.hpp"
#include "ngrpo/neighbor.hpp"
#include "ngrpo/sde_baseline.hpp"
#include "ngrpo/svg.hpp"

namespace ngrpo {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("verify: cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

// Central finite differences over every parameter of `model`. The error of
// each entry is taken relative to the gradient's own scale (max magnitude
// over analytic and difference entries), so near-zero entries are not
// judged against finite-difference cancellation noise.
template <class ValueFn>
double max_param_fd_rel_err(VelocityModel& model, const ParamGrad& analytic,
                            ValueFn value, double h) {
  double worst_abs = 0.0;
  double scale = 1e-12;
  auto probe = [&](double& p, double g) {
    const double saved = p;
    p = saved + h;
    const double fp = value(model);
    p = saved - h;
    const double fm = value(model);
    p = saved;
    const double fd = (fp - fm) / (2.0 * h);
    worst_abs = std::max(worst_abs, std::abs(g - fd));
    scale = std::max({scale, std::abs(g), std::abs(fd)});
  };
  for (std::size_t l = 0; l < model.weights().size(); ++l) {
    auto& w = model.weights()[l].data;
    for (std::size_t i = 0; i < w.size(); ++i) probe(w[i], analytic.weights[l].data[i]);
    auto& b = model.biases()[l];
    for (std::size_t i = 0; i < b.size(); ++i) probe(b[i], analytic.biases[l][i]);
  }
  return worst_abs / scale;
}

VelocityModel perturbed_copy(const VelocityModel& m, double scale, RngStream& rng) {
  VelocityModel out = m;
  for (auto& w : out.weights())
    for (auto& v : w.data) v += scale * rng.gaussian();
  for (auto& b : out.biases())
    for (auto& v : b) v += scale * rng.gaussian();
  return out;
}

GroupRollout make_group_rollout(const VelocityModel& model, int G, int T,
                                double sigma, RngStream& rng) {
  GroupRollout ro;
  ro.schedule = TimeSchedule::uniform(T);
  Vec eps_star = gaussian_sample(rng, model.data_dim());
  NoiseGroup ng = perturb_noise(eps_star, sigma, G, rng);
  ro.trajectories = rollout_group_serial(model, SolverKind::euler, ro.schedule,
                                         ng.members, ro.condition, rng.fork(77));
  for (int i = 0; i < G; ++i) ro.rewards.rewards.push_back(rng.gaussian());
  return ro;
}

// ---------------------------------------------------------------------- 1
CheckResult check_gradient_fidelity() {
  const auto t0 = Clock::now();
  CheckResult res;
  res.name = "1 gradient fidelity (NLL and neighbor objective vs central FD)";

  RngStream rng(20240901);
  double worst_nll = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const std::vector<int> hidden = (inst % 10 == 9) ? std::vector<int>{16, 16}
                                                     : std::vector<int>{8, 8};
    RngStream init = rng.fork(1000 + static_cast<std::uint64_t>(inst));
    VelocityModel model = VelocityModel::random_init(2, 0, hidden, init);
    Vec x_prev = gaussian_sample(rng, 2);
    const double t_plus = 0.15 + 0.85 * rng.uniform01();
    const double dt = 0.01 + 0.4 * t_plus * rng.uniform01();
    const double sigma = 0.05 + 0.45 * rng.uniform01();
    const auto ev = gaussian_log_prob(model, x_prev, t_plus, dt, sigma, x_prev, {});
    Vec sample = ev.mu;
    for (auto& s : sample) s += sigma * rng.gaussian();
    const ParamGrad analytic =
        gaussian_nll_grad(model, x_prev, t_plus, dt, sigma, sample, {});
    const double err = max_param_fd_rel_err(
        model, analytic,
        [&](const VelocityModel& m) {
          return -gaussian_log_prob(m, x_prev, t_plus, dt, sigma, sample, {}).log_prob;
        },
        1e-5);
    worst_nll = std::max(worst_nll, err);
  }

  double worst_obj = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    RngStream inst_rng = rng.fork(2000 + static_cast<std::uint64_t>(inst));
    RngStream init = inst_rng.fork(0);
    VelocityModel model = VelocityModel::random_init(2, 0, {8, 8}, init);
    GroupRollout ro = make_group_rollout(model, 6, 5, 0.4, inst_rng);
    const AdvantageVector adv = (inst % 2 == 0)
                                    ? advantages_standard(ro.rewards)
                                    : advantages_quasinorm(ro.rewards, 0.8);
    VelocityModel model_new = perturbed_copy(model, 5e-3, inst_rng);
    GrpoObjectiveConfig cfg;
    cfg.clip_eps = (inst % 3 == 0) ? 2e-3 : 0.5;  // both branch regimes
    const int anchor = inst % 6;
    const int step = 1 + inst % 4;
    const auto base = anchor_step_objective(ro, anchor, step, model_new, adv, cfg);
    const double err = max_param_fd_rel_err(
        model_new, base.grad,
        [&](const VelocityModel& m) {
          return anchor_step_objective(ro, anchor, step, m, adv, cfg, 1.0, true,
                                       /*want_grad=*/false)
              .value;
        },
        1e-5);
    worst_obj = std::max(worst_obj, err);
  }

  res.seconds = seconds_since(t0);
  res.pass = worst_nll < 1e-5 && worst_obj < 1e-4 && res.seconds < 30.0;
  std::ostringstream os;
  os << "max rel err: nll " << worst_nll << " (tol 1e-5), objective " << worst_obj
     << " (tol 1e-4)";
  res.details = os.str();
  return res;
}

// ---------------------------------------------------------------------- 2
double fit_loglog_slope(const std::vector<double>& dts, const std::vector<double>& errs) {
  const std::size_t n = dts.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(dts[i]);
    my += std::log(errs[i]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (std::log(dts[i]) - mx) * (std::log(errs[i]) - my);
    den += (std::log(dts[i]) - mx) * (std::log(dts[i]) - mx);
  }
  return num / den;
}

CheckResult check_solver_orders() {
  const auto t0 = Clock::now();
  CheckResult res;
  res.name = "2 solver convergence orders on the analytic Gaussian flow";

  const GaussianFlowOracle oracle({0.7, -0.4}, 1.3);
  RngStream rng(555);
  std::vector<Vec> inits;
  for (int i = 0; i < 8; ++i) inits.push_back(gaussian_sample(rng, 2));

  const std::vector<int> grid = {16, 32, 64, 128};
  auto terminal_errors = [&](SolverKind solver) {
    const TimeSchedule ref_sched = TimeSchedule::uniform(1024);
    std::vector<Vec> refs;
    for (const auto& x1 : inits)
      refs.push_back(rollout(oracle, solver, ref_sched, x1, {}).terminal());
    std::vector<double> errs;
    for (int T : grid) {
      const TimeSchedule sched = TimeSchedule::uniform(T);
      double e = 0.0;
      for (std::size_t i = 0; i < inits.size(); ++i) {
        const Vec term = rollout(oracle, solver, sched, inits[i], {}).terminal();
        e += std::sqrt(squared_distance(term, refs[i]));
      }
      errs.push_back(e / static_cast<double>(inits.size()));
    }
    return errs;
  };

  std::vector<double> dts;
  for (int T : grid) dts.push_back(1.0 / static_cast<double>(T));
  const double slope_euler = fit_loglog_slope(dts, terminal_errors(SolverKind::euler));
  const double slope_dpmpp = fit_loglog_slope(dts, terminal_errors(SolverKind::dpmpp));

  res.seconds = seconds_since(t0);
  res.pass = std::abs(slope_euler - 1.0) <= 0.25 && std::abs(slope_dpmpp - 2.0) <= 0.3 &&
             res.seconds < 60.0;
  std::ostringstream os;
  os << "slopes: euler " << slope_euler << " (1.0 +- 0.25), dpmpp " << slope_dpmpp
     << " (2.0 +- 0.3)";
  res.details = os.str();
  return res;
}

// ---------------------------------------------------------------------- 3
CheckResult check_sde_marginal() {
  const auto t0 = Clock::now();
  CheckResult res;
  res.name = "3 SDE terminal marginal matches the closed form";

  const double mu = 0.8, s = 1.2;
  const GaussianFlowOracle oracle({mu}, s);
  const int T = 64;
  const int N = 50000;
  const TimeSchedule sched = TimeSchedule::uniform(T);
  const SdeConfig sde = SdeConfig::make(sched, 0.3);

  RngStream rng(91);
  std::vector<Vec> inits;
  inits.reserve(N);
  for (int i = 0; i < N; ++i) inits.push_back(gaussian_sample(rng, 1));
  const auto trajs = rollout_group(oracle, SolverKind::sde, sched, inits, {},
                                   RngStream(1234), /*parallel=*/true, &sde);
  Vec terminals;
  terminals.reserve(N);
  for (const auto& tr : trajs) terminals.push_back(tr.terminal()[0]);
  const auto [m, sd] = mean_std(terminals);
  const double var = sd * sd;

  const double se_mean = s / std::sqrt(static_cast<double>(N));
  const double se_var = s * s * std::sqrt(2.0 / static_cast<double>(N - 1));
  const double mean_gap = std::abs(m - mu);
  const double var_gap = std::abs(var - s * s);

  res.seconds = seconds_since(t0);
  res.pass = mean_gap <= 3.0 * se_mean && var_gap <= 3.0 * se_var && res.seconds < 60.0;
  std::ostringstream os;
  os << "mean gap " << mean_gap << " (3se " << 3.0 * se_mean << "), var gap " << var_gap
     << " (3se " << 3.0 * se_var << ")";
  res.details = os.str();
  return res;
}

// ---------------------------------------------------------------------- 4
CheckResult check_contrastive_identity() {
  const auto t0 = Clock::now();
  CheckResult res;
  res.name = "4 contrastive NLL/MSE identity and drift residual";

  RngStream rng(411);
  RngStream init = rng.fork(0);
  VelocityModel model_old = VelocityModel::random_init(2, 0, {16, 16}, init);

  const int T = 8;
  const TimeSchedule sched = TimeSchedule::uniform(T);
  const SdeConfig sde = SdeConfig::make(sched, 0.3);
  std::vector<SdeSampleRecord> batch;
  for (int g = 0; g < 4; ++g) {
    RngStream traj_rng = rng.fork(10 + static_cast<std::uint64_t>(g));
    Vec x1 = gaussian_sample(traj_rng, 2);
    const Trajectory tr =
        rollout(model_old, SolverKind::sde, sched, x1, {}, &traj_rng, &sde);
    const double adv = rng.gaussian();
    for (auto& r : records_from_trajectory(tr, {}, adv)) batch.push_back(std::move(r));
  }

  // At theta == theta_old the residual must vanish exactly.
  const auto rep_same = contrastive_equivalence_check(model_old, model_old, batch);
  // And the identity must keep holding for a genuinely different model.
  VelocityModel model_new = perturbed_copy(model_old, 1e-3, rng);
  const auto rep_new = contrastive_equivalence_check(model_new, model_old, batch);

  res.seconds = seconds_since(t0);
  res.pass = rep_same.residual_norm == 0.0 && rep_same.max_identity_gap <= 1e-9 &&
             rep_same.grad_dual_route_rel_err < 1e-8 &&
             rep_new.max_identity_gap <= 1e-9 &&
             rep_new.grad_dual_route_rel_err < 1e-8 && res.seconds < 10.0;
  std::ostringstream os;
  os << "identity gap " << rep_new.max_identity_gap << " (tol 1e-9), |o| at old "
     << rep_same.residual_norm << ", dual-route rel err "
     << rep_new.grad_dual_route_rel_err << " (tol 1e-8), bound C "
     << rep_new.bound_constant;
  res.details = os.str();
  return res;
}

// ---------------------------------------------------------------------- 5
CheckResult check_anchor_estimator() {
  const auto t0 = Clock::now();
  CheckResult res;
  res.name = "5 symmetric-anchor estimator identity and unbiasedness";

  RngStream rng(5151);
  RngStream init = rng.fork(0);
  VelocityModel model = VelocityModel::random_init(2, 0, {8, 8}, init);
  GroupRollout ro = make_group_rollout(model, 12, 8, 0.3, rng);
  const AdvantageVector adv = advantages_quasinorm(ro.rewards, 0.8);
  VelocityModel model_new = perturbed_copy(model, 2e-3, rng);

  std::vector<int> steps;
  for (int j = 1; j <= 7; ++j) steps.push_back(j);
  GrpoObjectiveConfig cfg;
  cfg.clip_eps = 0.5;
  RngStream mc_rng = rng.fork(9);
  const auto rep =
      anchor_estimator_check(ro, model_new, steps, adv, cfg, 1000, mc_rng);

  const double id_gap = std::abs(rep.full_objective - rep.mean_of_singles);
  const double mc_gap = std::abs(rep.mc_mean - rep.full_objective);
  const double mc_tol = 3.0 * rep.mc_std_error + 1e-12;

  res.seconds = seconds_since(t0);
  res.pass = id_gap <= 1e-12 && mc_gap <= mc_tol &&
             rep.max_grad_permutation_gap <= 1e-12 && res.seconds < 30.0;
  std::ostringstream os;
  os << "identity gap " << id_gap << " (tol 1e-12), mc gap " << mc_gap << " (3se "
     << mc_tol << "), grad permutation gap " << rep.max_grad_permutation_gap;
  res.details = os.str();
  return res;
}

// ---------------------------------------------------------------------- 6
CheckResult check_quasinorm_algebra() {
  const auto t0 = Clock::now();
  CheckResult res;
  res.name = "6 quasi-norm flat-group algebra and p=2 equivalence";

  double worst_flat = 0.0, worst_p2 = 0.0;
  for (int G : {4, 8, 12}) {
    for (double p : {0.5, 0.8, 1.0, 2.0}) {
      RewardGroup g;
      for (int i = 0; i < G; ++i)
        g.rewards.push_back(1.3 + (i < G / 2 ? 0.7 : -0.7));
      const AdvantageVector a = advantages_quasinorm(g, p);
      const double want = std::pow(static_cast<double>(G), -1.0 / p);
      for (double v : a.values)
        worst_flat = std::max(worst_flat, std::abs(std::abs(v) - want));
    }
  }
  RngStream rng(66);
  for (int rep = 0; rep < 32; ++rep) {
    const int G = 4 + static_cast<int>(rng.uniform01() * 9.0);
    RewardGroup g;
    for (int i = 0; i < G; ++i) g.rewards.push_back(rng.gaussian() * 2.0 + 0.5);
    const AdvantageVector quasi = advantages_quasinorm(g, 2.0);
    const AdvantageVector standard = advantages_standard(g);
    const double f = 1.0 / std::sqrt(static_cast<double>(G));
    for (std::size_t i = 0; i < quasi.values.size(); ++i)
      worst_p2 = std::max(worst_p2,
                          std::abs(quasi.values[i] - f * standard.values[i]));
  }

  res.seconds = seconds_since(t0);
  res.pass = worst_flat <= 1e-12 && worst_p2 <= 1e-9;
  std::ostringstream os;
  os << "flat-group gap " << worst_flat << " (tol 1e-12), p=2 gap " << worst_p2
     << " (tol 1e-9)";
  res.details = os.str();
  return res;
}

// ---------------------------------------------------------------------- 7
CheckResult check_nfe_accounting() {
  CheckResult res;
  res.name = "7 NFE accounting reproduces the reference costs";
  const auto rows = nfe_reference_table();
  const std::vector<std::string> want = {"14.00", "4.00", "3.00", "1.33"};
  const std::vector<double> want_old = {25, 25, 16, 8};
  bool ok = rows.size() == want.size();
  std::ostringstream os;
  for (std::size_t i = 0; ok && i < rows.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", rows[i].nfe_theta);
    ok = want[i] == buf && rows[i].nfe_old == want_old[i];
    os << rows[i].label << "=" << buf << " ";
  }
  res.pass = ok;
  res.details = os.str();
  return res;
}

// ---------------------------------------------------------------------- 8
CheckResult check_neighborhood_statistics() {
  const auto t0 = Clock::now();
  CheckResult res;
  res.name = "8 perturbed-noise marginal and near-equidistance";

  const int d = 4096, G = 12, groups = 100;
  const double sigma = 0.3;
  RngStream rng(808);
  double sum = 0.0, sumsq = 0.0;
  long n_vals = 0;
  int spread_ok = 0;
  for (int g = 0; g < groups; ++g) {
    Vec eps_star = gaussian_sample(rng, d);
    const NoiseGroup ng = perturb_noise(eps_star, sigma, G, rng);
    for (const auto& m : ng.members)
      for (double v : m) {
        sum += v;
        sumsq += v * v;
        ++n_vals;
      }
    double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0, dsum = 0.0;
    int pairs = 0;
    for (int i = 0; i < G; ++i)
      for (int j = i + 1; j < G; ++j) {
        const double dist =
            std::sqrt(squared_distance(ng.members[static_cast<std::size_t>(i)],
                                       ng.members[static_cast<std::size_t>(j)]));
        dmin = std::min(dmin, dist);
        dmax = std::max(dmax, dist);
        dsum += dist;
        ++pairs;
      }
    const double spread = (dmax - dmin) / (dsum / pairs);
    if (spread < 0.15) ++spread_ok;
  }
  const double mean = sum / static_cast<double>(n_vals);
  const double var = sumsq / static_cast<double>(n_vals) - mean * mean;

  res.seconds = seconds_since(t0);
  res.pass = std::abs(mean) < 0.01 && std::abs(var - 1.0) < 0.02 && spread_ok >= 95;
  std::ostringstream os;
  os << "pooled mean " << mean << " (tol 0.01), pooled var-1 " << var - 1.0
     << " (tol 0.02), spread<0.15 in " << spread_ok << "/100 groups (need 95)";
  res.details = os.str();
  return res;
}

// ------------------------------------------------------------------- 9+10
ExperimentConfig e2e_base_config(const std::string& out_dir) {
  ExperimentConfig cfg;
  cfg.task = "eight_gaussians";
  cfg.reward = "target_logdensity";
  cfg.seeds = {1, 2, 3};
  cfg.out_dir = out_dir;
  cfg.dataset_size = 4096;
  cfg.pretrain_steps = 4000;
  cfg.pretrain_lr = 1e-3;
  cfg.train.group_size = 12;
  cfg.train.anchors_per_iter = 4;
  cfg.train.train_steps = 4;
  cfg.train.rollout_steps = 8;
  cfg.train.sigma = 0.3;
  cfg.train.p = 0.8;
  cfg.train.advantage_mode = AdvantageMode::quasi_norm;
  cfg.train.clip_eps = 1e-4;
  cfg.train.iterations = 300;
  cfg.train.lr = 7e-4;
  return cfg;
}

struct EndToEndOutcome {
  ExperimentResult neighbor;
  ExperimentResult sde;
};

CheckResult check_end_to_end(const std::string& out_dir, EndToEndOutcome& out) {
  const auto t0 = Clock::now();
  CheckResult res;
  res.name = "9 neighbor training lifts mean reward on the 2-D mixture";

  ExperimentConfig cfg = e2e_base_config(out_dir + "/neighbor");
  cfg.variant = "neighbor";
  out.neighbor = run_experiment(cfg, /*write_artifacts=*/true);

  int improved = 0;
  std::ostringstream os;
  for (const auto& sr : out.neighbor.seeds) {
    const double gain = sr.final_reward_mean - sr.pretrain_reward_mean;
    const double need = 0.5 * sr.pretrain_reward_std;
    const bool ok = gain >= need;
    improved += ok ? 1 : 0;
    os << "seed " << sr.seed << ": gain " << gain << (ok ? " >= " : " < ") << need
       << "; ";
  }
  res.seconds = seconds_since(t0);
  res.pass = improved >= 2 && res.seconds < 600.0;
  os << "(" << improved << "/3 improved, " << res.seconds << " s)";
  res.details = os.str();
  return res;
}

CheckResult check_comparative(const std::string& out_dir, EndToEndOutcome& out) {
  const auto t0 = Clock::now();
  CheckResult res;
  res.name = "10 neighbor reaches the SDE baseline's final reward";

  ExperimentConfig cfg = e2e_base_config(out_dir + "/sde");
  cfg.variant = "sde";
  cfg.train.advantage_mode = AdvantageMode::standard;
  out.sde = run_experiment(cfg, /*write_artifacts=*/true);

  int reached = 0;
  std::ostringstream os;
  std::vector<SvgSeries> overlay;
  const char* ncolors[] = {"#1f77b4", "#2ca02c", "#9467bd"};
  const char* scolors[] = {"#ff7f0e", "#d62728", "#8c564b"};
  for (std::size_t i = 0; i < out.sde.seeds.size(); ++i) {
    const auto ncurve = moving_average(out.neighbor.seeds[i].log.reward_curve(), 20);
    const auto scurve = moving_average(out.sde.seeds[i].log.reward_curve(), 20);
    const double sde_final = scurve.back();
    int reach_iter = -1;
    for (std::size_t k = 0; k < ncurve.size(); ++k) {
      if (ncurve[k] >= sde_final) {
        reach_iter = static_cast<int>(k);
        break;
      }
    }
    if (reach_iter >= 0) ++reached;
    os << "seed " << out.sde.seeds[i].seed << ": sde final " << sde_final
       << (reach_iter >= 0 ? " reached at iter " + std::to_string(reach_iter)
                           : " NOT reached")
       << "; ";
    overlay.push_back({"neighbor s" + std::to_string(out.neighbor.seeds[i].seed),
                       ncolors[i % 3], ncurve, {}});
    overlay.push_back({"sde s" + std::to_string(out.sde.seeds[i].seed),
                       scolors[i % 3], scurve, {}});
  }
  fs::create_directories(out_dir);
  write_curve_svg(out_dir + "/comparison_overlay.svg",
                  "mean group reward (MA20), neighbor vs sde baseline", overlay,
                  "config=" + out.neighbor.config_hash + "/" + out.sde.config_hash);

  res.seconds = seconds_since(t0);
  res.pass = reached >= 2;
  os << "(" << reached << "/3 reached)";
  res.details = os.str();
  return res;
}

// --------------------------------------------------------------------- 11
CheckResult check_determinism(const std::string& out_dir) {
  const auto t0 = Clock::now();
  CheckResult res;
  res.name = "11 byte-reproducibility of every pipeline";

  std::ostringstream os;
  bool ok = true;

  // Pretraining.
  ExperimentConfig pcfg = e2e_base_config(out_dir + "/det_pre");
  pcfg.dataset_size = 512;
  pcfg.pretrain_steps = 200;
  for (int run = 0; run < 2; ++run) {
    const VelocityModel m = prepare_base_model(pcfg, false);
    fs::create_directories(pcfg.out_dir);
    m.save_checkpoint(pcfg.out_dir + "/ckpt_" + std::to_string(run) + ".json");
  }
  const bool pre_ok = read_file(pcfg.out_dir + "/ckpt_0.json") ==
                      read_file(pcfg.out_dir + "/ckpt_1.json");
  ok = ok && pre_ok;
  os << "pretrain " << (pre_ok ? "ok" : "MISMATCH") << "; ";

  // Both trainers, twice each, wall clock suppressed.
  for (const std::string variant : {"neighbor", "sde"}) {
    std::vector<std::string> contents;
    for (int run = 0; run < 2; ++run) {
      ExperimentConfig cfg = e2e_base_config(out_dir + "/det_" + variant + "_" +
                                             std::to_string(run));
      cfg.variant = variant;
      if (variant == "sde") cfg.train.advantage_mode = AdvantageMode::standard;
      cfg.seeds = {1};
      cfg.dataset_size = 512;
      cfg.pretrain_steps = 200;
      cfg.train.iterations = 25;
      cfg.timing = false;
      run_experiment(cfg, true);
      contents.push_back(
          read_file(cfg.out_dir + "/metrics_" + variant + "_seed1.csv"));
    }
    const bool v_ok = contents[0] == contents[1];
    ok = ok && v_ok;
    os << variant << " " << (v_ok ? "ok" : "MISMATCH") << "; ";
  }

  // Sweep.
  std::vector<std::string> sweep_contents;
  for (int run = 0; run < 2; ++run) {
    ExperimentConfig cfg =
        e2e_base_config(out_dir + "/det_sweep_" + std::to_string(run));
    cfg.seeds = {1};
    cfg.dataset_size = 512;
    cfg.pretrain_steps = 100;
    cfg.train.iterations = 8;
    cfg.timing = false;
    run_sweep(cfg, "pnorm", true);
    sweep_contents.push_back(read_file(cfg.out_dir + "/sweep_summary.csv"));
  }
  const bool sweep_ok = sweep_contents[0] == sweep_contents[1];
  ok = ok && sweep_ok;
  os << "sweep " << (sweep_ok ? "ok" : "MISMATCH");

  res.seconds = seconds_since(t0);
  res.pass = ok;
  res.details = os.str();
  return res;
}

}  // namespace

std::vector<CheckResult> run_verification(const VerifyOptions& opts) {
  std::vector<CheckResult> checks;
  checks.push_back(check_gradient_fidelity());
  checks.push_back(check_solver_orders());
  checks.push_back(check_sde_marginal());
  checks.push_back(check_contrastive_identity());
  checks.push_back(check_anchor_estimator());
  checks.push_back(check_quasinorm_algebra());
  checks.push_back(check_nfe_accounting());
  checks.push_back(check_neighborhood_statistics());
  if (opts.include_slow) {
    EndToEndOutcome outcome;
    checks.push_back(check_end_to_end(opts.out_dir, outcome));
    checks.push_back(check_comparative(opts.out_dir, outcome));
    checks.push_back(check_determinism(opts.out_dir));
  }
  return checks;
}

int report_checks(const std::vector<CheckResult>& checks) {
  int failures = 0;
  for (const auto& c : checks) {
    std::printf("[%s] %s -- %s (%.1f s)\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                c.details.c_str(), c.seconds);
    if (!c.pass) ++failures;
  }
  std::printf("%zu checks, %d failure%s\n", checks.size(), failures,
              failures == 1 ? "" : "s");
  return failures;
}

}  // namespace ngrpo
