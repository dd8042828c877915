// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration: JSON round-trip with a schema version, flat
// key namespace mirroring the training-loop field names, and a stable
// content hash embedded in every output artifact.

#ifndef NGRPO_CONFIG_HPP_
#define NGRPO_CONFIG_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ngrpo/trainer.hpp"

namespace ngrpo {

// Exit-code taxonomy of the CLI.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  int schema_version = 1;
  std::string task = "eight_gaussians";
  std::string reward = "target_logdensity";
  std::string variant = "neighbor";  // neighbor | sde | sde_windowed
  bool conditional = false;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::string out_dir = "out";
  std::string checkpoint;  // load this model instead of pretraining
  int dataset_size = 4096;
  std::uint64_t dataset_seed = 7;
  int pretrain_steps = 4000;
  double pretrain_lr = 1e-3;
  int pretrain_batch = 32;
  std::uint64_t pretrain_seed = 9000;
  std::vector<int> hidden = {64, 64, 64};
  int eval_samples = 256;
  std::uint64_t eval_seed = 4242;
  bool timing = true;  // false writes wall_ms as 0 for byte-stable output
  TrainLoopConfig train;

  void validate() const;
};

std::string serialize_config(const ExperimentConfig& cfg);
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config_file(const std::string& path);
void save_config_file(const ExperimentConfig& cfg, const std::string& path);

// FNV-1a 64-bit hash of the canonical serialization, hex encoded.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace ngrpo

#endif  // NGRPO_CONFIG_HPP_
