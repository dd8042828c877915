// SPDX-License-Identifier: Apache-2.0

#include "ngrpo/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ngrpo {

double GaussianMixture::log_density(const Vec& x) const {
  if (means.empty()) throw std::invalid_argument("GaussianMixture: no components");
  const double d = static_cast<double>(x.size());
  const double var = component_std * component_std;
  const double log_norm = -0.5 * d * std::log(2.0 * std::numbers::pi * var);
  // logsumexp over components.
  double best = -std::numeric_limits<double>::infinity();
  Vec logs(means.size());
  for (std::size_t k = 0; k < means.size(); ++k) {
    logs[k] = std::log(weights[k]) + log_norm -
              squared_distance(x, means[k]) / (2.0 * var);
    best = std::max(best, logs[k]);
  }
  double sum = 0.0;
  for (double l : logs) sum += std::exp(l - best);
  return best + std::log(sum);
}

int GaussianMixture::sample_component(RngStream& rng) const {
  const double u = rng.uniform01();
  double acc = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    acc += weights[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(weights.size()) - 1;
}

Vec GaussianMixture::sample(RngStream& rng) const {
  const int k = sample_component(rng);
  Vec x = gaussian_sample(rng, dim());
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = means[static_cast<std::size_t>(k)][i] + component_std * x[i];
  return x;
}

RewardKind reward_kind_from_name(const std::string& name) {
  if (name == "target_logdensity") return RewardKind::target_logdensity;
  if (name == "neg_mode_distance") return RewardKind::neg_mode_distance;
  if (name == "flatness_probe") return RewardKind::flatness_probe;
  throw std::invalid_argument("unknown reward: " + name);
}

const char* reward_kind_name(RewardKind k) {
  switch (k) {
    case RewardKind::target_logdensity: return "target_logdensity";
    case RewardKind::neg_mode_distance: return "neg_mode_distance";
    case RewardKind::flatness_probe: return "flatness_probe";
  }
  return "?";
}

double RewardFn::eval(const Vec& x0, const Vec& cond) const {
  if (!all_finite(x0)) throw std::invalid_argument("reward_eval: non-finite input");
  switch (kind) {
    case RewardKind::target_logdensity:
      return mixture.log_density(x0);
    case RewardKind::neg_mode_distance: {
      int mode = mode_index;
      if (!cond.empty()) {
        mode = static_cast<int>(
            std::max_element(cond.begin(), cond.end()) - cond.begin());
      }
      const auto& mu = mixture.means.at(static_cast<std::size_t>(mode));
      return -std::sqrt(squared_distance(x0, mu));
    }
    case RewardKind::flatness_probe: {
      const double r = norm2(x0);
      return r < plateau_radius ? plateau_value
                                : plateau_value - (r - plateau_radius);
    }
  }
  throw std::logic_error("reward_eval: unreachable");
}

double reward_eval(const RewardFn& fn, const Vec& x0, const Vec& cond) {
  return fn.eval(x0, cond);
}

}  // namespace ngrpo
