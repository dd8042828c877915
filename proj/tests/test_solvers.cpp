// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "ngrpo/solvers.hpp"
#include "ngrpo/velocity.hpp"

using namespace ngrpo;

namespace {

struct ConstantField : VelocityField {
  Vec v;
  explicit ConstantField(Vec value) : v(std::move(value)) {}
  Vec eval(const Vec&, double, const Vec&) const override { return v; }
  int data_dim() const override { return static_cast<int>(v.size()); }
};

}  // namespace

TEST_CASE("time schedule endpoints and monotonicity") {
  const TimeSchedule s = TimeSchedule::uniform(8);
  CHECK(s.steps() == 8);
  CHECK(s.times.front() == 1.0);
  CHECK(s.times.back() == 0.0);
  for (std::size_t i = 1; i < s.times.size(); ++i) CHECK(s.times[i] < s.times[i - 1]);

  const TimeSchedule shifted = TimeSchedule::uniform_shifted(8, 3.0);
  CHECK(shifted.times.front() == 1.0);
  CHECK(shifted.times.back() == 0.0);
  CHECK(shifted.times[4] > s.times[4]);  // shift > 1 biases towards t = 1

  CHECK_THROWS_AS(TimeSchedule::uniform(0), std::invalid_argument);
}

TEST_CASE("euler step arithmetic") {
  const ConstantField f2({2.0});
  CHECK(euler_step(f2, {1.0}, 1.0, 0.1, {}) == Vec{0.8});
  const ConstantField f0({0.0});
  CHECK(euler_step(f0, {1.0}, 1.0, 0.1, {}) == Vec{1.0});
  CHECK_THROWS_AS(euler_step(f2, {1.0}, 1.0, 0.0, {}), std::invalid_argument);
}

TEST_CASE("dpmpp is exact for constant velocity fields") {
  const ConstantField f({1.5, -0.5});
  for (const int T : {2, 5, 9}) {
    const TimeSchedule sched = TimeSchedule::uniform(T);
    const Vec x1{0.3, 0.8};
    const Trajectory tr = rollout(f, SolverKind::dpmpp, sched, x1, {});
    // exact solution: x0 = x1 - 1 * v
    CHECK(std::abs(tr.terminal()[0] - (x1[0] - 1.5)) < 1e-12);
    CHECK(std::abs(tr.terminal()[1] - (x1[1] + 0.5)) < 1e-12);
  }
}

TEST_CASE("euler error halves against a fine-grid reference") {
  const GaussianFlowOracle o({0.5}, 1.2);
  const Vec x1{0.7};
  const Vec ref =
      rollout(o, SolverKind::euler, TimeSchedule::uniform(1024), x1, {}).terminal();
  const double e64 = std::abs(
      rollout(o, SolverKind::euler, TimeSchedule::uniform(64), x1, {}).terminal()[0] -
      ref[0]);
  const double e128 = std::abs(
      rollout(o, SolverKind::euler, TimeSchedule::uniform(128), x1, {}).terminal()[0] -
      ref[0]);
  CHECK(e64 / e128 == doctest::Approx(2.0).epsilon(0.25));
}

TEST_CASE("dpmpp error shrinks fourfold against a fine-grid reference") {
  const GaussianFlowOracle o({0.5}, 1.2);
  RngStream rng(3);
  double ratio_sum = 0.0;
  const int reps = 4;
  for (int i = 0; i < reps; ++i) {
    const Vec x1 = gaussian_sample(rng, 1);
    const Vec ref =
        rollout(o, SolverKind::dpmpp, TimeSchedule::uniform(1024), x1, {}).terminal();
    const double e32 = std::abs(
        rollout(o, SolverKind::dpmpp, TimeSchedule::uniform(32), x1, {}).terminal()[0] -
        ref[0]);
    const double e64 = std::abs(
        rollout(o, SolverKind::dpmpp, TimeSchedule::uniform(64), x1, {}).terminal()[0] -
        ref[0]);
    ratio_sum += e32 / e64;
  }
  CHECK(ratio_sum / reps == doctest::Approx(4.0).epsilon(0.3));
}

TEST_CASE("dpmpp 8-step rollout costs 8 evaluations") {
  const GaussianFlowOracle o({0.0}, 1.0);
  const Trajectory tr =
      rollout(o, SolverKind::dpmpp, TimeSchedule::uniform(8), {0.4}, {});
  CHECK(tr.nfe == 8);
  CHECK(tr.states.size() == 9);
}

TEST_CASE("sde step: degenerate sigma equals euler bit-exactly") {
  const GaussianFlowOracle o({0.3}, 0.9);
  RngStream rng(17);
  const Vec x{1.1};
  const auto r = sde_step(o, x, 0.7, 0.05, 0.0, rng, {});
  CHECK(r.x_next == euler_step(o, x, 0.7, 0.05, {}));
  CHECK(r.x_next == r.ode_point);
}

TEST_CASE("sde step drift correction arithmetic") {
  const ConstantField f({1.0});
  RngStream rng(18);
  const auto r = sde_step(f, {2.0}, 0.5, 0.1, 0.2, rng, {});
  CHECK(r.eps_hat == Vec{2.5});  // x + (1-t) v = 2 + 0.5
  const double ode = 2.0 - 0.1 * 1.0;
  CHECK(r.ode_point == Vec{ode});
  // drift = sigma^2/(2t) * eps_hat = 0.04/1.0 * 2.5 = 0.1
  CHECK(r.x_next[0] == doctest::Approx(ode - 0.1 + 0.2 * r.noise[0]).epsilon(1e-15));
  CHECK_THROWS_AS(sde_step(f, {2.0}, 0.0, 0.1, 0.2, rng, {}), std::invalid_argument);
}

TEST_CASE("sde rollout is reproducible per seed and counts nfe") {
  const GaussianFlowOracle o({0.5}, 1.1);
  const TimeSchedule sched = TimeSchedule::uniform(25);
  const SdeConfig sde = SdeConfig::make(sched, 0.3);
  CHECK(sde.sigma.back() == 0.0);  // final step deterministic
  RngStream r1(5), r2(5);
  const Trajectory a = rollout(o, SolverKind::sde, sched, {0.2}, {}, &r1, &sde);
  const Trajectory b = rollout(o, SolverKind::sde, sched, {0.2}, {}, &r2, &sde);
  CHECK(a.nfe == 25);
  for (std::size_t i = 0; i < a.states.size(); ++i) CHECK(a.states[i] == b.states[i]);
}

TEST_CASE("single-step schedule does one euler update") {
  const ConstantField f({0.25, -1.0});
  const Trajectory tr =
      rollout(f, SolverKind::euler, TimeSchedule::uniform(1), {1.0, 1.0}, {});
  CHECK(tr.nfe == 1);
  CHECK(tr.terminal() == Vec{0.75, 2.0});
}

TEST_CASE("euler rollout nfe equals step count") {
  const GaussianFlowOracle o({0.0}, 1.0);
  const Trajectory tr =
      rollout(o, SolverKind::euler, TimeSchedule::uniform(25), {0.4}, {});
  CHECK(tr.nfe == 25);
}

TEST_CASE("group rollout: parallel kernel matches serial reference bit-exactly") {
  RngStream rng(8);
  RngStream init = rng.fork(0);
  const VelocityModel model = VelocityModel::random_init(2, 0, {16, 16}, init);
  std::vector<Vec> inits;
  for (int i = 0; i < 12; ++i) inits.push_back(gaussian_sample(rng, 2));
  const TimeSchedule sched = TimeSchedule::uniform(8);
  const SdeConfig sde = SdeConfig::make(sched, 0.3);

  for (const SolverKind solver : {SolverKind::euler, SolverKind::dpmpp, SolverKind::sde}) {
    const auto serial = rollout_group_serial(model, solver, sched, inits, {},
                                             RngStream(42),
                                             solver == SolverKind::sde ? &sde : nullptr);
    const auto parallel = rollout_group(model, solver, sched, inits, {}, RngStream(42),
                                        true, solver == SolverKind::sde ? &sde : nullptr);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
      REQUIRE(serial[i].states.size() == parallel[i].states.size());
      for (std::size_t j = 0; j < serial[i].states.size(); ++j)
        CHECK(serial[i].states[j] == parallel[i].states[j]);
    }
  }
}

TEST_CASE("trajectory csv dump has the expected shape") {
  const ConstantField f({1.0, 2.0});
  const auto trajs = rollout_group_serial(f, SolverKind::euler, TimeSchedule::uniform(2),
                                          {{0.0, 0.0}, {1.0, 1.0}}, {}, RngStream(1));
  dump_trajectories_csv(trajs, "test_traj.csv");
  std::ifstream in("test_traj.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "traj_id,step,t,x0,x1,nfe_cumulative");
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 6);  // 2 trajectories x 3 grid points
  in.close();
  std::remove("test_traj.csv");
}
