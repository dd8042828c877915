// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "ngrpo/neighbor.hpp"
#include "ngrpo/rewards.hpp"
#include "ngrpo/tasks.hpp"

using namespace ngrpo;

namespace {

GroupRollout euler_group(const VelocityModel& model, int G, int T, double sigma,
                         RngStream& rng) {
  GroupRollout ro;
  ro.schedule = TimeSchedule::uniform(T);
  Vec eps_star = gaussian_sample(rng, model.data_dim());
  NoiseGroup ng = perturb_noise(eps_star, sigma, G, rng);
  ro.trajectories = rollout_group_serial(model, SolverKind::euler, ro.schedule,
                                         ng.members, ro.condition, rng.fork(1));
  return ro;
}

VelocityModel nudge(const VelocityModel& m, double scale, RngStream& rng) {
  VelocityModel out = m;
  for (auto& w : out.weights())
    for (auto& v : w.data) v += scale * rng.gaussian();
  return out;
}

}  // namespace

TEST_CASE("perturb_noise: degenerate sigma keeps the base noise") {
  RngStream rng(1);
  const Vec eps_star = gaussian_sample(rng, 16);
  const NoiseGroup g = perturb_noise(eps_star, 1e-9, 4, rng);
  for (const auto& m : g.members)
    for (std::size_t i = 0; i < m.size(); ++i)
      CHECK(std::abs(m[i] - eps_star[i]) < 1e-8);
  CHECK_THROWS_AS(perturb_noise(eps_star, 0.0, 4, rng), std::invalid_argument);
  CHECK_THROWS_AS(perturb_noise(eps_star, 1.2, 4, rng), std::invalid_argument);
  CHECK_THROWS_AS(perturb_noise(eps_star, 0.3, 1, rng), std::invalid_argument);
}

TEST_CASE("perturb_noise at sigma = 1 gives independent members") {
  RngStream rng(2);
  const Vec eps_star(64, 5.0);  // any trace of eps* would be visible
  const NoiseGroup g = perturb_noise(eps_star, 1.0, 2, rng);
  double corr = 0.0;
  for (std::size_t i = 0; i < 64; ++i) corr += g.members[0][i] * 5.0;
  CHECK(std::abs(corr / 64.0) < 1.0);  // no deterministic eps* component survives
}

TEST_CASE("perturbed members stay marginally standard normal") {
  const int d = 4096, G = 12, groups = 100;
  RngStream rng(3);
  double sum = 0.0, sumsq = 0.0;
  long n = 0;
  int spread_ok = 0;
  for (int g = 0; g < groups; ++g) {
    const Vec eps_star = gaussian_sample(rng, d);
    const NoiseGroup ng = perturb_noise(eps_star, 0.3, G, rng);
    for (const auto& m : ng.members)
      for (double v : m) {
        sum += v;
        sumsq += v * v;
        ++n;
      }
    double dmin = 1e300, dmax = 0.0, dsum = 0.0;
    int pairs = 0;
    for (int i = 0; i < G; ++i)
      for (int j = i + 1; j < G; ++j) {
        const double dist = std::sqrt(squared_distance(
            ng.members[static_cast<std::size_t>(i)],
            ng.members[static_cast<std::size_t>(j)]));
        dmin = std::min(dmin, dist);
        dmax = std::max(dmax, dist);
        dsum += dist;
        ++pairs;
      }
    if ((dmax - dmin) / (dsum / pairs) < 0.15) ++spread_ok;
  }
  const double mean = sum / static_cast<double>(n);
  const double var = sumsq / static_cast<double>(n) - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
  CHECK(spread_ok >= 95);
}

TEST_CASE("leap policy: self-dominance, symmetry, softmax reuse") {
  const std::vector<Vec> far = {{0.0, 0.0}, {7.0, 0.0}, {0.0, 8.0}};
  const LeapPolicy self = leap_policy(far, {0.0, 0.0});
  CHECK(self.probs[0] > 0.999);

  const std::vector<Vec> pair = {{1.0, 0.0}, {-1.0, 0.0}};
  const LeapPolicy sym = leap_policy(pair, {0.0, 0.0});
  CHECK(sym.probs[0] == doctest::Approx(0.5).epsilon(1e-12));

  // squared distances (0, 2, 2) around the anchor
  const double r = std::sqrt(2.0);
  const std::vector<Vec> tri = {{0.0, 0.0}, {r, 0.0}, {0.0, r}};
  const LeapPolicy p = leap_policy(tri, {0.0, 0.0});
  CHECK(std::abs(p.probs[0] - 0.7870) < 1e-4);
  CHECK(std::abs(p.probs[1] - 0.1065) < 1e-4);
  CHECK(std::abs(p.probs[2] - 0.1065) < 1e-4);

  CHECK_THROWS_AS(leap_policy({{1.0}, {2.0}}, {1.0, 0.0}), std::invalid_argument);
}

TEST_CASE("anchor ratios are one when policies coincide") {
  RngStream rng(4);
  RngStream init = rng.fork(0);
  const VelocityModel model = VelocityModel::random_init(2, 0, {8, 8}, init);
  const GroupRollout ro = euler_group(model, 6, 5, 0.4, rng);
  for (int step : {1, 3, 4})
    for (int k : {0, 2, 5}) {
      const Vec ratios = anchor_ratios(ro, k, step, model);
      for (double r : ratios) CHECK(r == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("anchor ratios are equivariant under candidate relabeling") {
  RngStream rng(5);
  RngStream init = rng.fork(0);
  const VelocityModel model = VelocityModel::random_init(2, 0, {8, 8}, init);
  GroupRollout ro = euler_group(model, 5, 4, 0.5, rng);
  VelocityModel model_new = nudge(model, 1e-3, rng);

  const int step = 2;
  const Vec base = anchor_ratios(ro, 1, step, model_new);

  // swap members 0 and 3 consistently; the anchor index moves with it.
  // the normalizer is summed in a different order, so compare to within
  // a few ulps rather than bit-exactly.
  GroupRollout permuted = ro;
  std::swap(permuted.trajectories[0], permuted.trajectories[3]);
  const Vec swapped = anchor_ratios(permuted, 1, step, model_new);
  CHECK(swapped[0] == doctest::Approx(base[3]).epsilon(1e-14));
  CHECK(swapped[3] == doctest::Approx(base[0]).epsilon(1e-14));
  CHECK(swapped[1] == doctest::Approx(base[1]).epsilon(1e-14));

  GroupRollout anchor_moved = ro;
  std::swap(anchor_moved.trajectories[1], anchor_moved.trajectories[4]);
  const Vec moved = anchor_ratios(anchor_moved, 4, step, model_new);
  CHECK(moved[4] == doctest::Approx(base[1]).epsilon(1e-14));
  CHECK(moved[1] == doctest::Approx(base[4]).epsilon(1e-14));
}

TEST_CASE("one ascent step pulls the anchor toward a positive candidate") {
  RngStream rng(6);
  RngStream init = rng.fork(0);
  const VelocityModel model = VelocityModel::random_init(2, 0, {16, 16}, init);
  const GroupRollout ro = euler_group(model, 6, 5, 0.5, rng);

  GrpoObjectiveConfig cfg;
  cfg.clip_eps = 1e6;  // unclipped
  const int anchor = 0, step = 2;
  for (const double a_j : {1.0, -1.0}) {
    for (const int j : {2, 4}) {
      AdvantageVector adv;
      adv.values.assign(6, 0.0);
      adv.values[static_cast<std::size_t>(j)] = a_j;
      const auto res = anchor_step_objective(ro, anchor, step, model, adv, cfg);

      // directional derivative of ||x_j - y(theta)||^2 along grad J
      const auto ctx_prev = ro.trajectories[anchor].states[step - 1];
      const double t_prev = ro.schedule.times[step - 1];
      const double dt = t_prev - ro.schedule.times[step];
      const Vec y = euler_step(model, ctx_prev, t_prev, dt, {});
      Vec upstream(2);
      const Vec& cj = ro.trajectories[static_cast<std::size_t>(j)].states[step];
      for (int i = 0; i < 2; ++i)
        upstream[static_cast<std::size_t>(i)] =
            2.0 * (y[static_cast<std::size_t>(i)] - cj[static_cast<std::size_t>(i)]);
      auto dist_grad = model.backward(ctx_prev, t_prev, {}, upstream);
      dist_grad.param_grad.scale(-dt);  // through y = x_prev - dt v

      double dir = 0.0;
      for (std::size_t l = 0; l < res.grad.weights.size(); ++l) {
        dir += dot(res.grad.weights[l].data, dist_grad.param_grad.weights[l].data);
        dir += dot(res.grad.biases[l], dist_grad.param_grad.biases[l]);
      }
      if (a_j > 0)
        CHECK(dir < 0.0);  // ascent shrinks the distance
      else
        CHECK(dir > 0.0);
    }
  }
}

TEST_CASE("iteration reports nfe and leaves the model fixed at lr 0") {
  RngStream init(7);
  VelocityModel model = VelocityModel::random_init(2, 0, {16, 16}, init);
  TrainLoopConfig cfg;
  cfg.group_size = 12;
  cfg.anchors_per_iter = 4;
  cfg.train_steps = 4;
  cfg.rollout_steps = 8;
  cfg.lr = 0.0;
  NeighborGrpoTrainer trainer(model, cfg);

  const GaussianMixture mix = eight_gaussians_mixture();
  RewardFunction reward = [&mix](const Vec& x, const Vec&) {
    return mix.log_density(x);
  };
  PromptSampler prompts = [](RngStream&) { return Vec{}; };

  RngStream rng(8);
  const auto m = trainer.iterate(0, prompts, reward, rng);
  CHECK(m.nfe_theta == doctest::Approx(4.0 / 12.0 * 4.0).epsilon(1e-12));
  CHECK(m.nfe_old == 8.0);
  CHECK(m.nfe_old_total == 12 * 8);
  CHECK(m.nfe_theta_total == 4 * 4);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.2f", m.nfe_theta);
  CHECK(std::string(buf) == "1.33");

  for (std::size_t l = 0; l < model.weights().size(); ++l) {
    CHECK(trainer.model().weights()[l].data == model.weights()[l].data);
    CHECK(trainer.model().biases()[l] == model.biases()[l]);
  }
  CHECK(std::isfinite(m.mean_reward));
  CHECK(std::isfinite(m.objective));
}

TEST_CASE("iterations are deterministic given the seed") {
  RngStream init(9);
  const VelocityModel model = VelocityModel::random_init(2, 0, {16, 16}, init);
  TrainLoopConfig cfg;
  cfg.group_size = 6;
  cfg.anchors_per_iter = 2;
  cfg.train_steps = 2;
  cfg.rollout_steps = 6;
  cfg.lr = 1e-3;

  const GaussianMixture mix = eight_gaussians_mixture();
  RewardFunction reward = [&mix](const Vec& x, const Vec&) {
    return mix.log_density(x);
  };
  PromptSampler prompts = [](RngStream&) { return Vec{}; };

  auto run = [&]() {
    NeighborGrpoTrainer trainer(model, cfg);
    RngStream rng(99);
    for (int i = 0; i < 5; ++i) trainer.iterate(i, prompts, reward, rng);
    return trainer.model();
  };
  const VelocityModel a = run();
  const VelocityModel b = run();
  for (std::size_t l = 0; l < a.weights().size(); ++l)
    CHECK(a.weights()[l].data == b.weights()[l].data);
}

TEST_CASE("serial and parallel rollout give identical training trajectories") {
  RngStream init(10);
  const VelocityModel model = VelocityModel::random_init(2, 0, {16, 16}, init);
  const GaussianMixture mix = eight_gaussians_mixture();
  RewardFunction reward = [&mix](const Vec& x, const Vec&) {
    return mix.log_density(x);
  };
  PromptSampler prompts = [](RngStream&) { return Vec{}; };

  auto run = [&](bool parallel) {
    TrainLoopConfig cfg;
    cfg.group_size = 8;
    cfg.anchors_per_iter = 3;
    cfg.train_steps = 3;
    cfg.rollout_steps = 6;
    cfg.lr = 5e-4;
    cfg.parallel_rollout = parallel;
    NeighborGrpoTrainer trainer(model, cfg);
    RngStream rng(7);
    IterationMetrics last;
    for (int i = 0; i < 4; ++i) last = trainer.iterate(i, prompts, reward, rng);
    return std::pair<VelocityModel, double>(trainer.model(), last.mean_reward);
  };
  const auto [ma, ra] = run(false);
  const auto [mb, rb] = run(true);
  CHECK(ra == rb);
  for (std::size_t l = 0; l < ma.weights().size(); ++l)
    CHECK(ma.weights()[l].data == mb.weights()[l].data);
}

TEST_CASE("anchor estimator: identity, unbiasedness, order independence") {
  RngStream rng(11);
  RngStream init = rng.fork(0);
  const VelocityModel model = VelocityModel::random_init(2, 0, {8, 8}, init);
  GroupRollout ro = euler_group(model, 12, 8, 0.3, rng);
  for (int i = 0; i < 12; ++i) ro.rewards.rewards.push_back(rng.gaussian());
  const AdvantageVector adv = advantages_quasinorm(ro.rewards, 0.8);
  const VelocityModel model_new = nudge(model, 2e-3, rng);

  std::vector<int> steps = {1, 2, 3, 4, 5, 6, 7};
  GrpoObjectiveConfig cfg{0.5, 0.0};
  RngStream mc(12);
  const auto rep = anchor_estimator_check(ro, model_new, steps, adv, cfg, 1000, mc);
  CHECK(std::abs(rep.full_objective - rep.mean_of_singles) <= 1e-12);
  CHECK(std::abs(rep.mc_mean - rep.full_objective) <= 3.0 * rep.mc_std_error + 1e-12);
  CHECK(rep.max_grad_permutation_gap <= 1e-12);
}

TEST_CASE("flat plateau rewards yield a degenerate group and no update") {
  RngStream init(20);
  const VelocityModel model = VelocityModel::random_init(2, 0, {8, 8}, init);
  TrainLoopConfig cfg;
  cfg.group_size = 6;
  cfg.anchors_per_iter = 2;
  cfg.train_steps = 2;
  cfg.rollout_steps = 6;
  cfg.lr = 1e-2;  // nonzero on purpose: zero advantages must stop the update
  NeighborGrpoTrainer trainer(model, cfg);
  RewardFunction plateau = [](const Vec&, const Vec&) { return 3.5; };
  PromptSampler prompts = [](RngStream&) { return Vec{}; };
  RngStream rng(8);
  const auto m = trainer.iterate(0, prompts, plateau, rng);
  CHECK(m.std_reward == 0.0);
  for (std::size_t l = 0; l < model.weights().size(); ++l)
    CHECK(trainer.model().weights()[l].data == model.weights()[l].data);
}

TEST_CASE("kl surrogate: value shift and gradient against finite differences") {
  RngStream rng(21);
  RngStream init = rng.fork(0);
  const VelocityModel model = VelocityModel::random_init(2, 0, {8, 8}, init);
  GroupRollout ro = euler_group(model, 5, 4, 0.5, rng);
  for (int i = 0; i < 5; ++i) ro.rewards.rewards.push_back(rng.gaussian());
  const AdvantageVector adv = advantages_standard(ro.rewards);
  VelocityModel model_new = nudge(model, 2e-3, rng);

  GrpoObjectiveConfig plain{0.5, 0.0};
  GrpoObjectiveConfig with_kl{0.5, 0.3};
  const auto base = anchor_step_objective(ro, 1, 2, model_new, adv, plain);
  const auto kl = anchor_step_objective(ro, 1, 2, model_new, adv, with_kl);
  // beta * mean squared log-ratio gap added on top of the clipped value
  double surrogate = 0.0;
  for (double r : base.ratios) surrogate += std::log(r) * std::log(r);
  surrogate /= 5.0;
  CHECK(kl.value == doctest::Approx(base.value + 0.3 * surrogate).epsilon(1e-12));

  // gradient of the combined objective vs central differences
  const double h = 1e-6;
  double worst = 0.0, scale = 1e-12;
  VelocityModel probe = model_new;
  for (std::size_t l = 0; l < probe.weights().size(); ++l)
    for (std::size_t i = 0; i < probe.weights()[l].data.size(); ++i) {
      double& p = probe.weights()[l].data[i];
      const double saved = p;
      p = saved + h;
      const double fp =
          anchor_step_objective(ro, 1, 2, probe, adv, with_kl, 1.0, true, false).value;
      p = saved - h;
      const double fm =
          anchor_step_objective(ro, 1, 2, probe, adv, with_kl, 1.0, true, false).value;
      p = saved;
      const double fd = (fp - fm) / (2 * h);
      const double a = kl.grad.weights[l].data[i];
      worst = std::max(worst, std::abs(a - fd));
      scale = std::max({scale, std::abs(a), std::abs(fd)});
    }
  CHECK(worst / scale < 1e-6);
}

TEST_CASE("training improves reward after a one-step update in ratio terms") {
  // after one gradient step favoring candidate j, the anchor-conditioned
  // ratio of j rises above one and the worst negative candidate falls
  RngStream rng(13);
  RngStream init = rng.fork(0);
  VelocityModel model = VelocityModel::random_init(2, 0, {16, 16}, init);
  GroupRollout ro = euler_group(model, 6, 5, 0.5, rng);

  AdvantageVector adv;
  adv.values.assign(6, 0.0);
  adv.values[3] = 1.0;
  adv.values[5] = -1.0;
  GrpoObjectiveConfig cfg{1e6, 0.0};
  const auto res = anchor_step_objective(ro, 0, 2, model, adv, cfg);

  // plain ascent step
  VelocityModel stepped = model;
  const double lr = 1e-2;
  for (std::size_t l = 0; l < stepped.weights().size(); ++l) {
    for (std::size_t i = 0; i < stepped.weights()[l].data.size(); ++i)
      stepped.weights()[l].data[i] += lr * res.grad.weights[l].data[i];
    for (std::size_t i = 0; i < stepped.biases()[l].size(); ++i)
      stepped.biases()[l][i] += lr * res.grad.biases[l][i];
  }
  const Vec after = anchor_ratios(ro, 0, 2, stepped);
  CHECK(after[3] > 1.0);
  CHECK(after[5] < 1.0);
}
