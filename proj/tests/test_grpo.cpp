// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "ngrpo/grpo.hpp"

using namespace ngrpo;

TEST_CASE("standard advantages on a linear ramp") {
  const auto adv = advantages_standard({{0, 1, 2, 3}});
  CHECK(std::abs(adv.values[0] + 1.34164) < 1e-4);
  CHECK(std::abs(adv.values[1] + 0.44721) < 1e-4);
  CHECK(std::abs(adv.values[2] - 0.44721) < 1e-4);
  CHECK(std::abs(adv.values[3] - 1.34164) < 1e-4);
}

TEST_CASE("degenerate group yields zeros, tiny group throws") {
  const auto adv = advantages_standard({{5, 5, 5, 5}});
  for (double v : adv.values) CHECK(v == 0.0);
  CHECK_THROWS_AS(advantages_standard({{1.0}}), std::invalid_argument);
}

TEST_CASE("standard advantages live on the sqrt(G) sphere") {
  RngStream rng(2);
  for (int rep = 0; rep < 100; ++rep) {
    const int G = 2 + static_cast<int>(rng.uniform01() * 14);
    RewardGroup g;
    for (int i = 0; i < G; ++i) g.rewards.push_back(rng.gaussian() * 3.0 + 1.0);
    const auto adv = advantages_standard(g);
    CHECK(std::abs(norm2(adv.values) - std::sqrt(static_cast<double>(G))) < 1e-9);
  }
}

TEST_CASE("standard advantages are invariant to affine reward maps") {
  RngStream rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    RewardGroup g;
    for (int i = 0; i < 6; ++i) g.rewards.push_back(rng.gaussian());
    const double alpha = rng.gaussian();
    if (std::abs(alpha) < 1e-3) continue;
    const double beta = rng.gaussian();
    RewardGroup h;
    for (double r : g.rewards) h.rewards.push_back(alpha * r + beta);
    const auto a = advantages_standard(g);
    const auto b = advantages_standard(h);
    const double sign = alpha > 0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
      CHECK(std::abs(b.values[i] - sign * a.values[i]) < 1e-9);
  }
}

TEST_CASE("quasi-norm advantages: flat-vector closed forms") {
  const auto p1 = advantages_quasinorm({{2, 2, 0, 0}}, 1.0);  // centered (1,1,-1,-1)
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(std::abs(std::abs(p1.values[i]) - 0.25) < 1e-12);

  const auto p08 = advantages_quasinorm({{2, 2, 0, 0}}, 0.8);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(std::abs(std::abs(p08.values[i]) - 0.176777) < 1e-5);

  CHECK_THROWS_AS(advantages_quasinorm({{1, 2}}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(advantages_quasinorm({{1, 2}}, 2.5), std::invalid_argument);
}

TEST_CASE("p=2 recovers the standard normalization over sqrt(G)") {
  const auto q = advantages_quasinorm({{0, 1, 2, 3}}, 2.0);
  const auto s = advantages_standard({{0, 1, 2, 3}});
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(q.values[i] == doctest::Approx(0.5 * s.values[i]).epsilon(1e-12));
}

TEST_CASE("flat-group shrinkage is monotone in G and p") {
  auto mag = [](int G, double p) {
    RewardGroup g;
    for (int i = 0; i < G; ++i) g.rewards.push_back(i < G / 2 ? 1.0 : -1.0);
    return std::abs(advantages_quasinorm(g, p).values[0]);
  };
  CHECK(mag(4, 0.8) == doctest::Approx(std::pow(4.0, -1.25)).epsilon(1e-12));
  CHECK(mag(8, 0.8) < mag(4, 0.8));
  CHECK(mag(12, 0.8) < mag(8, 0.8));
  CHECK(mag(8, 0.5) < mag(8, 0.8));
  CHECK(mag(8, 0.8) < mag(8, 2.0));
}

TEST_CASE("quasi-norm preserves sign and ordering") {
  RngStream rng(4);
  for (int rep = 0; rep < 50; ++rep) {
    RewardGroup g;
    for (int i = 0; i < 8; ++i) g.rewards.push_back(rng.gaussian() * 2.0);
    const double p = 0.2 + 1.8 * rng.uniform01();
    const auto q = advantages_quasinorm(g, p);
    const auto s = advantages_standard(g);
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 8; ++j) {
        if (s.values[i] < s.values[j]) CHECK(q.values[i] < q.values[j]);
        if (s.values[i] > 0) CHECK(q.values[i] > 0);
      }
  }
}

TEST_CASE("clipped objective examples") {
  GrpoObjectiveConfig cfg;
  cfg.clip_eps = 1e-4;

  AdvantageVector adv;
  adv.values = {1.0, -1.0};
  const auto at_one = clipped_objective(adv, {1.0, 1.0}, cfg);
  CHECK(at_one.value == 0.0);

  const auto ex = clipped_objective(adv, {1.5, 0.5}, cfg);
  CHECK(ex.value == doctest::Approx(0.0002).epsilon(1e-9));
  CHECK(ex.clipped[0]);
  CHECK(ex.clipped[1]);

  GrpoObjectiveConfig wide;
  wide.clip_eps = std::numeric_limits<double>::infinity();
  const auto open = clipped_objective(adv, {1.5, 0.5}, wide);
  CHECK(open.value == doctest::Approx(1.5 * 1.0 + (-1.0) * 0.5).epsilon(1e-15));

  CHECK_THROWS_AS(clipped_objective(adv, {1.0, -0.5}, cfg), std::invalid_argument);
  CHECK_THROWS_AS(clipped_objective(adv, {1.0, 0.0}, cfg), std::invalid_argument);
}

TEST_CASE("per-term value is non-increasing as clip_eps shrinks") {
  RngStream rng(6);
  for (int rep = 0; rep < 100; ++rep) {
    AdvantageVector adv;
    Vec ratios;
    for (int i = 0; i < 5; ++i) {
      adv.values.push_back(rng.gaussian());
      ratios.push_back(std::exp(0.5 * rng.gaussian()));
    }
    GrpoObjectiveConfig tight{0.05, 0.0};
    GrpoObjectiveConfig loose{0.8, 0.0};
    const auto vt = clipped_objective(adv, ratios, tight);
    const auto vl = clipped_objective(adv, ratios, loose);
    for (std::size_t i = 0; i < 5; ++i)
      CHECK(vt.per_term[i] <= vl.per_term[i] + 1e-12);
  }
}

TEST_CASE("gradient mask matches the active branch") {
  AdvantageVector adv;
  adv.values = {1.0, 1.0, -1.0, -1.0};
  const Vec ratios = {1.5, 1.0, 0.5, 1.0};
  GrpoObjectiveConfig cfg{0.1, 0.0};
  const Vec d = clipped_objective_dratio(adv, ratios, cfg);
  CHECK(d[0] == 0.0);  // positive advantage, ratio above 1+eps: clipped branch
  CHECK(d[1] == 1.0);
  CHECK(d[2] == 0.0);  // negative advantage, ratio below 1-eps: clipped branch
  CHECK(d[3] == -1.0);
}
