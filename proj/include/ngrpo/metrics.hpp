// SPDX-License-Identifier: Apache-2.0
//
// Append-only per-iteration metrics log with a deterministic CSV format.

#ifndef NGRPO_METRICS_HPP_
#define NGRPO_METRICS_HPP_

#include <string>
#include <vector>

#include "ngrpo/trainer.hpp"

namespace ngrpo {

// Version tag stamped into every metrics manifest.
inline constexpr const char* kVersionTag = "ngrpo-0.1.0";

// Shortest round-trip-exact decimal form of a double ("%.17g" trimmed).
std::string format_double(double v);

struct MetricsLog {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<IterationMetrics> rows;

  void append(const IterationMetrics& m) { rows.push_back(m); }

  // Header comment with config hash and seed, then
  // iter,variant,mean_reward,std_reward,objective,frac_clipped,
  // nfe_old,nfe_theta,wall_ms,seed. With include_timing false the wall_ms
  // column is written as 0 so repeated runs are byte-identical.
  void write_csv(const std::string& path, bool include_timing = true) const;

  static MetricsLog read_csv(const std::string& path);

  std::vector<double> reward_curve() const;
};

// Simple moving average with window w (prefix partial windows included).
std::vector<double> moving_average(const std::vector<double>& xs, int w);

void write_samples_csv(const std::vector<Vec>& samples, const std::string& path,
                       const std::string& config_hash, std::uint64_t seed);

}  // namespace ngrpo

#endif  // NGRPO_METRICS_HPP_
