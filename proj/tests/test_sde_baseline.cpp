// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "ngrpo/sde_baseline.hpp"
#include "ngrpo/tasks.hpp"

using namespace ngrpo;

namespace {

struct ConstantField : VelocityField {
  Vec v;
  explicit ConstantField(Vec value) : v(std::move(value)) {}
  Vec eval(const Vec&, double, const Vec&) const override { return v; }
  int data_dim() const override { return static_cast<int>(v.size()); }
};

VelocityModel nudged(const VelocityModel& m, double scale, RngStream& rng) {
  VelocityModel out = m;
  for (auto& w : out.weights())
    for (auto& v : w.data) v += scale * rng.gaussian();
  return out;
}

std::vector<SdeSampleRecord> sample_batch(const VelocityModel& model, int n_traj,
                                          int T, RngStream& rng) {
  const TimeSchedule sched = TimeSchedule::uniform(T);
  const SdeConfig sde = SdeConfig::make(sched, 0.3);
  std::vector<SdeSampleRecord> batch;
  for (int g = 0; g < n_traj; ++g) {
    RngStream traj_rng = rng.fork(static_cast<std::uint64_t>(g));
    const Vec x1 = gaussian_sample(traj_rng, 2);
    const Trajectory tr =
        rollout(model, SolverKind::sde, sched, x1, {}, &traj_rng, &sde);
    for (auto& r : records_from_trajectory(tr, {}, rng.gaussian()))
      batch.push_back(std::move(r));
  }
  return batch;
}

}  // namespace

TEST_CASE("gaussian log prob at the mode and one sigma away") {
  const ConstantField f({0.5, -1.0, 0.2});
  const double sigma = 0.2;
  const Vec x{0.1, 0.0, -0.4};
  const auto at_mode = gaussian_log_prob(f, x, 0.6, 0.05, sigma, x, {});
  // evaluate exactly at mu
  const auto exact = gaussian_log_prob(f, x, 0.6, 0.05, sigma, at_mode.mu, {});
  const double want = -1.5 * std::log(2.0 * std::numbers::pi * sigma * sigma);
  CHECK(exact.log_prob == doctest::Approx(want).epsilon(1e-12));

  Vec shifted = at_mode.mu;
  shifted[1] += sigma;
  const auto off = gaussian_log_prob(f, x, 0.6, 0.05, sigma, shifted, {});
  CHECK(exact.log_prob - off.log_prob == doctest::Approx(0.5).epsilon(1e-12));

  CHECK_THROWS_AS(gaussian_log_prob(f, x, 0.6, 0.05, 0.0, x, {}),
                  std::invalid_argument);
  CHECK_THROWS_AS(gaussian_log_prob(f, x, 0.0, 0.05, sigma, x, {}),
                  std::invalid_argument);
}

TEST_CASE("1-D policy density integrates to one") {
  RngStream init(1);
  const VelocityModel model = VelocityModel::random_init(1, 0, {8, 8}, init);
  const Vec x_prev{0.7};
  const double t = 0.8, dt = 0.1, sigma = 0.25;
  const auto center = gaussian_log_prob(model, x_prev, t, dt, sigma, x_prev, {});
  const double mu = center.mu[0];
  double integral = 0.0;
  const int n = 4000;
  const double lo = mu - 10.0 * sigma, hi = mu + 10.0 * sigma;
  const double h = (hi - lo) / n;
  for (int i = 0; i <= n; ++i) {
    const double xv = lo + h * i;
    const double p =
        std::exp(gaussian_log_prob(model, x_prev, t, dt, sigma, {xv}, {}).log_prob);
    integral += (i == 0 || i == n) ? 0.5 * p : p;
  }
  integral *= h;
  CHECK(std::abs(integral - 1.0) < 1e-6);
}

TEST_CASE("nll gradient matches finite differences") {
  RngStream rng(2);
  double worst = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    RngStream init = rng.fork(static_cast<std::uint64_t>(inst));
    VelocityModel m = VelocityModel::random_init(2, 0, {8, 8}, init);
    Vec x_prev = gaussian_sample(rng, 2);
    const double t = 0.2 + 0.8 * rng.uniform01();
    const double dt = 0.02 + 0.3 * t * rng.uniform01();
    const double sigma = 0.05 + 0.4 * rng.uniform01();
    const auto ev = gaussian_log_prob(m, x_prev, t, dt, sigma, x_prev, {});
    Vec sample = ev.mu;
    for (auto& s : sample) s += sigma * rng.gaussian();
    const ParamGrad g = gaussian_nll_grad(m, x_prev, t, dt, sigma, sample, {});
    const double h = 1e-5;
    for (std::size_t l = 0; l < m.weights().size(); ++l)
      for (std::size_t i = 0; i < m.weights()[l].data.size(); ++i) {
        double& p = m.weights()[l].data[i];
        const double saved = p;
        p = saved + h;
        const double fp = -gaussian_log_prob(m, x_prev, t, dt, sigma, sample, {}).log_prob;
        p = saved - h;
        const double fm = -gaussian_log_prob(m, x_prev, t, dt, sigma, sample, {}).log_prob;
        p = saved;
        const double fd = (fp - fm) / (2 * h);
        const double a = g.weights[l].data[i];
        worst = std::max(worst,
                         std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6}));
      }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("drift residual vanishes at theta_old and with zero noise") {
  RngStream rng(3);
  RngStream init = rng.fork(0);
  const VelocityModel model = VelocityModel::random_init(2, 0, {8, 8}, init);
  const Vec x = gaussian_sample(rng, 2);
  const auto same = drift_residual(model, model, x, 0.5, 0.2, {});
  CHECK(norm2(same.o_t) == 0.0);
  VelocityModel other = nudged(model, 1e-2, rng);
  const auto zero_sigma = drift_residual(other, model, x, 0.5, 0.0, {});
  CHECK(norm2(zero_sigma.o_t) == 0.0);
  CHECK_THROWS_AS(drift_residual(other, model, x, 0.0, 0.2, {}),
                  std::invalid_argument);
}

TEST_CASE("drift residual scales roughly linearly with the update size") {
  RngStream rng(4);
  RngStream init = rng.fork(0);
  const VelocityModel model = VelocityModel::random_init(2, 0, {16, 16}, init);
  const Vec x = gaussian_sample(rng, 2);

  // fixed random direction, three update magnitudes a decade apart
  ParamGrad dir = model.zero_grad();
  RngStream dir_rng(5);
  for (auto& w : dir.weights)
    for (auto& v : w.data) v = dir_rng.gaussian();
  for (auto& b : dir.biases)
    for (auto& v : b) v = dir_rng.gaussian();

  Vec norms;
  for (const double lr : {1e-3, 1e-4, 1e-5}) {
    VelocityModel moved = model;
    for (int step = 0; step < 3; ++step) {
      for (std::size_t l = 0; l < moved.weights().size(); ++l) {
        for (std::size_t i = 0; i < moved.weights()[l].data.size(); ++i)
          moved.weights()[l].data[i] += lr * dir.weights[l].data[i];
        for (std::size_t i = 0; i < moved.biases()[l].size(); ++i)
          moved.biases()[l][i] += lr * dir.biases[l][i];
      }
    }
    norms.push_back(norm2(drift_residual(moved, model, x, 0.5, 0.2, {}).o_t));
  }
  CHECK(norms[0] / norms[1] == doctest::Approx(10.0).epsilon(2.0));
  CHECK(norms[1] / norms[2] == doctest::Approx(10.0).epsilon(2.0));
  CHECK(norms[2] < norms[0]);
}

TEST_CASE("contrastive identity holds exactly") {
  RngStream rng(6);
  RngStream init = rng.fork(0);
  const VelocityModel model_old = VelocityModel::random_init(2, 0, {16, 16}, init);
  const auto batch = sample_batch(model_old, 4, 6, rng);

  const auto same = contrastive_equivalence_check(model_old, model_old, batch);
  CHECK(same.max_identity_gap <= 1e-9);
  CHECK(same.residual_norm == 0.0);
  CHECK(same.grad_dual_route_rel_err < 1e-8);

  VelocityModel model_new = nudged(model_old, 1e-3, rng);
  const auto moved = contrastive_equivalence_check(model_new, model_old, batch);
  CHECK(moved.max_identity_gap <= 1e-9);
  CHECK(moved.grad_dual_route_rel_err < 1e-8);
  CHECK(moved.residual_norm > 0.0);
  CHECK(moved.dropped_residual_gap <= moved.bound_constant * moved.residual_norm + 1e-15);
}

TEST_CASE("zero advantages zero both gradients") {
  RngStream rng(7);
  RngStream init = rng.fork(0);
  const VelocityModel model_old = VelocityModel::random_init(2, 0, {8, 8}, init);
  auto batch = sample_batch(model_old, 2, 5, rng);
  for (auto& r : batch) r.advantage = 0.0;
  VelocityModel model_new = nudged(model_old, 1e-3, rng);
  const auto rep = contrastive_equivalence_check(model_new, model_old, batch);
  CHECK(rep.dropped_residual_gap == 0.0);
  CHECK(rep.grad_dual_route_rel_err == 0.0);
}

TEST_CASE("iteration metrics: nfe accounting and ratio-at-origin") {
  RngStream init(8);
  const VelocityModel model = VelocityModel::random_init(2, 0, {16, 16}, init);
  TrainLoopConfig cfg;
  cfg.group_size = 12;
  cfg.train_steps = 14;
  cfg.rollout_steps = 25;
  cfg.advantage_mode = AdvantageMode::standard;
  cfg.lr = 0.0;
  SdeGrpoTrainer trainer(model, cfg);

  const GaussianMixture mix = eight_gaussians_mixture();
  RewardFunction reward = [&mix](const Vec& x, const Vec&) {
    return mix.log_density(x);
  };
  PromptSampler prompts = [](RngStream&) { return Vec{}; };
  RngStream rng(9);
  const auto m = trainer.iterate(0, prompts, reward, rng);
  CHECK(m.nfe_theta == 14.0);
  CHECK(m.nfe_old == 25.0);
  CHECK(m.nfe_old_total == 12 * 25);
  // theta == theta_old throughout: every ratio is 1, objective is the sum of
  // centered advantages, which is 0
  CHECK(std::abs(m.objective) < 1e-9);
  CHECK(m.frac_clipped == 0.0);
}

TEST_CASE("sde trainer is deterministic and parallel-agnostic") {
  RngStream init(10);
  const VelocityModel model = VelocityModel::random_init(2, 0, {16, 16}, init);
  const GaussianMixture mix = eight_gaussians_mixture();
  RewardFunction reward = [&mix](const Vec& x, const Vec&) {
    return mix.log_density(x);
  };
  PromptSampler prompts = [](RngStream&) { return Vec{}; };

  auto run = [&](bool parallel) {
    TrainLoopConfig cfg;
    cfg.group_size = 6;
    cfg.train_steps = 3;
    cfg.rollout_steps = 6;
    cfg.advantage_mode = AdvantageMode::standard;
    cfg.lr = 5e-4;
    cfg.parallel_rollout = parallel;
    SdeGrpoTrainer trainer(model, cfg);
    RngStream rng(11);
    for (int i = 0; i < 4; ++i) trainer.iterate(i, prompts, reward, rng);
    return trainer.model();
  };
  const VelocityModel a = run(false);
  const VelocityModel b = run(true);
  for (std::size_t l = 0; l < a.weights().size(); ++l)
    CHECK(a.weights()[l].data == b.weights()[l].data);
}

TEST_CASE("windowed variant restricts update steps and slides") {
  RngStream init(12);
  const VelocityModel model = VelocityModel::random_init(2, 0, {8, 8}, init);
  TrainLoopConfig cfg;
  cfg.group_size = 4;
  cfg.train_steps = 2;
  cfg.rollout_steps = 8;
  cfg.sde_window = 2;
  cfg.iterations = 10;
  SdeGrpoTrainer trainer(model, cfg);
  const auto first = trainer.eligible_steps(0);
  CHECK(first == std::vector<int>{1, 2});
  const auto last = trainer.eligible_steps(9);
  CHECK(last.back() == 7);
  CHECK(static_cast<int>(last.size()) == 2);
}
