// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ngrpo/mathcore.hpp"

using namespace ngrpo;

TEST_CASE("gaussian_sample is deterministic per seed") {
  RngStream a(42), b(42);
  const Vec a1 = gaussian_sample(a, 2);
  const Vec a2 = gaussian_sample(a, 2);
  CHECK(a1 != a2);
  CHECK(gaussian_sample(b, 2) == a1);
  CHECK(gaussian_sample(b, 2) == a2);
}

TEST_CASE("gaussian_sample moments over 1e5 draws") {
  RngStream rng(7);
  const int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = gaussian_sample(rng, 1)[0];
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("gaussian_sample rejects dim 0") {
  RngStream rng(1);
  CHECK_THROWS_AS(gaussian_sample(rng, 0), std::invalid_argument);
}

TEST_CASE("distinct seeds diverge within 16 draws") {
  RngStream a(1), b(2);
  bool differs = false;
  for (int i = 0; i < 16; ++i) differs |= a.next_u64() != b.next_u64();
  CHECK(differs);
}

TEST_CASE("fork derives independent child streams") {
  RngStream parent(123);
  RngStream c0 = parent.fork(0);
  RngStream c1 = parent.fork(1);
  CHECK(c0.next_u64() != c1.next_u64());
  // forking does not consume parent state
  RngStream parent2(123);
  CHECK(parent.next_u64() == parent2.next_u64());
  CHECK(derive_seed(123, 0) != derive_seed(123, 1));
}

TEST_CASE("softmax_neg_sqdist basics") {
  const Vec sym = softmax_neg_sqdist({0.0, 0.0});
  CHECK(sym[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(sym[1] == doctest::Approx(0.5).epsilon(1e-12));

  const Vec p = softmax_neg_sqdist({0.0, 2.0, 2.0});
  CHECK(std::abs(p[0] - 0.7870) < 1e-4);
  CHECK(std::abs(p[1] - 0.1065) < 1e-4);
  CHECK(std::abs(p[2] - 0.1065) < 1e-4);

  const Vec q = softmax_neg_sqdist({0.0, 1e6, 1e6});
  CHECK(all_finite(q));
  CHECK(q[0] == doctest::Approx(1.0));
  CHECK(q[1] == 0.0);

  CHECK_THROWS_AS(softmax_neg_sqdist({}), std::invalid_argument);
}

TEST_CASE("softmax properties: probability vector, shift invariance") {
  RngStream rng(99);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 1 + static_cast<int>(rng.uniform01() * 8);
    Vec d(static_cast<std::size_t>(n));
    for (auto& v : d) v = std::abs(rng.gaussian()) * 30.0;
    const Vec p = softmax_neg_sqdist(d);
    double s = 0.0;
    for (double v : p) {
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);

    Vec shifted = d;
    const double c = rng.gaussian() * 5.0;
    for (auto& v : shifted) v += c;
    const Vec p2 = softmax_neg_sqdist(shifted);
    for (std::size_t i = 0; i < p.size(); ++i)
      CHECK(p[i] == doctest::Approx(p2[i]).epsilon(1e-12));
  }
}

TEST_CASE("lp_norm examples and homogeneity") {
  CHECK(lp_norm({1, 1, 1, 1}, 2.0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::abs(lp_norm({1, 1, 1, 1}, 0.8) - 5.65685) < 1e-5);
  CHECK(lp_norm({3, 4}, 2.0) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK_THROWS_AS(lp_norm({1.0}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(lp_norm({1.0}, -1.0), std::invalid_argument);

  RngStream rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 1 + static_cast<int>(rng.uniform01() * 6);
    Vec v(static_cast<std::size_t>(n));
    for (auto& x : v) x = rng.gaussian();
    const double p = 0.1 + 1.9 * rng.uniform01();
    const double alpha = rng.gaussian();
    CHECK(lp_norm(scaled(v, alpha), p) ==
          doctest::Approx(std::abs(alpha) * lp_norm(v, p)).epsilon(1e-9));
  }
}

TEST_CASE("mean_std population convention") {
  const auto [m1, s1] = mean_std({1, 2, 3});
  CHECK(m1 == doctest::Approx(2.0));
  CHECK(std::abs(s1 - 0.81650) < 1e-5);

  const auto [m2, s2] = mean_std({5, 5, 5});
  CHECK(m2 == 5.0);
  CHECK(s2 == 0.0);

  const auto [m3, s3] = mean_std({0.0});
  CHECK(m3 == 0.0);
  CHECK(s3 == 0.0);

  CHECK_THROWS_AS(mean_std({}), std::invalid_argument);
}
