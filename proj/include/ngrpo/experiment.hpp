// SPDX-License-Identifier: Apache-2.0
//
// End-to-end experiment pipeline: pretrain or load a model, run the
// selected trainer per seed, emit metrics CSVs and SVG plots, plus the
// NFE cost report and the preset ablation sweeps.

#ifndef NGRPO_EXPERIMENT_HPP_
#define NGRPO_EXPERIMENT_HPP_

#include <string>
#include <vector>

#include "ngrpo/config.hpp"
#include "ngrpo/metrics.hpp"
#include "ngrpo/rewards.hpp"
#include "ngrpo/tasks.hpp"
#include "ngrpo/velocity.hpp"

namespace ngrpo {

struct SeedResult {
  std::uint64_t seed = 0;
  MetricsLog log;
  double pretrain_reward_mean = 0.0;
  double pretrain_reward_std = 0.0;
  double final_reward_mean = 0.0;  // evaluated on the fixed noise bank
  std::vector<Vec> samples_before;
  std::vector<Vec> samples_after;
};

struct ExperimentResult {
  std::string config_hash;
  ExperimentConfig config;
  std::vector<SeedResult> seeds;
  double wall_s_per_iter = 0.0;
};

// Pretrains (or loads) the base model for a config. The checkpoint is
// written to <out_dir>/pretrained_<task>.json when freshly trained.
VelocityModel prepare_base_model(const ExperimentConfig& cfg, bool write_checkpoint);

// Deterministic evaluation: rollout of `n` terminal samples from the fixed
// noise bank (eval_seed), plus their rewards.
struct EvalStats {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<Vec> samples;
};
EvalStats evaluate_model(const VelocityModel& model, const ExperimentConfig& cfg,
                         const RewardFn& reward, int n);

RewardFn make_reward(const ExperimentConfig& cfg, const Task& task);

// Full run over all configured seeds; writes CSV/SVG artifacts into
// cfg.out_dir unless write_artifacts is false.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                bool write_artifacts = true);

// NFE cost table: per-sample rollout cost (T) and gradient cost (B/G * K).
struct NfeRow {
  std::string label;
  int rollout_steps;
  int group_size;
  int anchors;
  int train_steps;
  double nfe_old;
  double nfe_theta;
};

NfeRow nfe_row(const std::string& label, int T, int G, int B, int K);
std::vector<NfeRow> nfe_reference_table();
NfeRow nfe_report(const ExperimentConfig& cfg);
std::string format_nfe_table(const std::vector<NfeRow>& rows);

// Preset sweeps: "sigma" {0.1,0.3,0.5,1.0}, "anchors" {2,4,8,12},
// "pnorm" {0.5,0.8,1,2}. Writes sweep_summary.csv:
// variant,hyperparam,final_mean_reward,auc_reward,wall_s_per_iter.
struct SweepEntry {
  std::string variant;
  std::string hyperparam;
  double final_mean_reward;
  double auc_reward;
  double wall_s_per_iter;
};

std::vector<double> sweep_preset_values(const std::string& preset);
std::vector<SweepEntry> run_sweep(const ExperimentConfig& base,
                                  const std::string& preset,
                                  bool write_artifacts = true);

// Reward-curve SVG regenerated from metrics CSVs alone.
void plot_metrics_csv(const std::vector<std::string>& csv_paths,
                      const std::string& out_svg);

}  // namespace ngrpo

#endif  // NGRPO_EXPERIMENT_HPP_
