// SPDX-License-Identifier: Apache-2.0
//
// Toy 2-D target distributions and dataset generation with fixed seeds.

#ifndef NGRPO_TASKS_HPP_
#define NGRPO_TASKS_HPP_

#include <string>
#include <vector>

#include "ngrpo/mathcore.hpp"
#include "ngrpo/rewards.hpp"

namespace ngrpo {

// Eight isotropic Gaussians equally spaced on a circle of radius 2,
// component std 0.15, equal weights.
GaussianMixture eight_gaussians_mixture();

struct Dataset {
  std::vector<Vec> points;
  std::vector<Vec> conds;  // empty when unconditional
};

// Samples from the circle mixture. When `conditional` is set, each point
// carries the one-hot index (cond_dim 8) of its component.
Dataset make_eight_gaussians(int n, std::uint64_t seed, bool conditional = false);

// Two interleaved half-moons with Gaussian jitter, scaled to roughly
// match the circle task's extent.
Dataset make_two_moons(int n, std::uint64_t seed);

struct Task {
  std::string name;
  Dataset dataset;
  GaussianMixture mixture;  // reward target (also the data law for the circle)
  int cond_dim = 0;
};

Task make_task(const std::string& name, int n, std::uint64_t seed,
               bool conditional = false);

}  // namespace ngrpo

#endif  // NGRPO_TASKS_HPP_
