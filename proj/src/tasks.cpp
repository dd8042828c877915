// SPDX-License-Identifier: Apache-2.0

#include "ngrpo/tasks.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ngrpo {

GaussianMixture eight_gaussians_mixture() {
  GaussianMixture mix;
  mix.component_std = 0.15;
  const int k = 8;
  for (int i = 0; i < k; ++i) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / k;
    mix.means.push_back({2.0 * std::cos(a), 2.0 * std::sin(a)});
    mix.weights.push_back(1.0 / k);
  }
  return mix;
}

Dataset make_eight_gaussians(int n, std::uint64_t seed, bool conditional) {
  const GaussianMixture mix = eight_gaussians_mixture();
  RngStream rng(seed);
  Dataset ds;
  for (int i = 0; i < n; ++i) {
    const int comp = mix.sample_component(rng);
    Vec x = gaussian_sample(rng, 2);
    for (int j = 0; j < 2; ++j)
      x[static_cast<std::size_t>(j)] =
          mix.means[static_cast<std::size_t>(comp)][static_cast<std::size_t>(j)] +
          mix.component_std * x[static_cast<std::size_t>(j)];
    ds.points.push_back(std::move(x));
    if (conditional) {
      Vec onehot(8, 0.0);
      onehot[static_cast<std::size_t>(comp)] = 1.0;
      ds.conds.push_back(std::move(onehot));
    }
  }
  return ds;
}

Dataset make_two_moons(int n, std::uint64_t seed) {
  RngStream rng(seed);
  Dataset ds;
  const double noise = 0.08;
  for (int i = 0; i < n; ++i) {
    const bool upper = rng.uniform01() < 0.5;
    const double a = std::numbers::pi * rng.uniform01();
    double x, y;
    if (upper) {
      x = std::cos(a);
      y = std::sin(a) - 0.25;
    } else {
      x = 1.0 - std::cos(a);
      y = 0.25 - std::sin(a);
    }
    ds.points.push_back({2.0 * x - 1.0 + noise * rng.gaussian(),
                         2.0 * y + noise * rng.gaussian()});
  }
  return ds;
}

Task make_task(const std::string& name, int n, std::uint64_t seed, bool conditional) {
  Task task;
  task.name = name;
  if (name == "eight_gaussians") {
    task.dataset = make_eight_gaussians(n, seed, conditional);
    task.mixture = eight_gaussians_mixture();
    task.cond_dim = conditional ? 8 : 0;
  } else if (name == "two_moons") {
    if (conditional) throw std::invalid_argument("two_moons task is unconditional");
    task.dataset = make_two_moons(n, seed);
    // Reward target for the moons: a coarse mixture along both arcs.
    GaussianMixture mix;
    mix.component_std = 0.3;
    for (int i = 0; i < 6; ++i) {
      const double a = std::numbers::pi * (static_cast<double>(i) + 0.5) / 6.0;
      mix.means.push_back({2.0 * std::cos(a) - 1.0, 2.0 * (std::sin(a) - 0.25)});
      mix.weights.push_back(1.0 / 12.0);
      mix.means.push_back({2.0 * (1.0 - std::cos(a)) - 1.0, 2.0 * (0.25 - std::sin(a))});
      mix.weights.push_back(1.0 / 12.0);
    }
    task.mixture = mix;
    task.cond_dim = 0;
  } else {
    throw std::invalid_argument("unknown task: " + name);
  }
  return task;
}

}  // namespace ngrpo
