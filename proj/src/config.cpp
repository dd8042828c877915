// SPDX-License-Identifier: Apache-2.0

#include "ngrpo/config.hpp"

#include <fstream>

#include "json.hpp"

namespace ngrpo {

using nlohmann::json;

void ExperimentConfig::validate() const {
  if (schema_version != 1) throw ConfigError("config: unsupported schema_version");
  if (variant != "neighbor" && variant != "sde" && variant != "sde_windowed")
    throw ConfigError("config: unknown variant: " + variant);
  if (seeds.empty()) throw ConfigError("config: need at least one seed");
  if (dataset_size < 1) throw ConfigError("config: dataset_size must be >= 1");
  if (pretrain_steps < 1) throw ConfigError("config: pretrain_steps must be >= 1");
  if (eval_samples < 2) throw ConfigError("config: eval_samples must be >= 2");
  if (variant == "sde_windowed" && train.sde_window < 1)
    throw ConfigError("config: sde_windowed needs train.sde_window >= 1");
  if (reward != "target_logdensity" && reward != "neg_mode_distance" &&
      reward != "flatness_probe")
    throw ConfigError("config: unknown reward: " + reward);
  if (task != "eight_gaussians" && task != "two_moons")
    throw ConfigError("config: unknown task: " + task);
  try {
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::string serialize_config(const ExperimentConfig& cfg) {
  json j;
  j["schema_version"] = cfg.schema_version;
  j["task"] = cfg.task;
  j["reward"] = cfg.reward;
  j["variant"] = cfg.variant;
  j["conditional"] = cfg.conditional;
  j["seeds"] = cfg.seeds;
  j["out_dir"] = cfg.out_dir;
  j["checkpoint"] = cfg.checkpoint;
  j["dataset_size"] = cfg.dataset_size;
  j["dataset_seed"] = cfg.dataset_seed;
  j["pretrain_steps"] = cfg.pretrain_steps;
  j["pretrain_lr"] = cfg.pretrain_lr;
  j["pretrain_batch"] = cfg.pretrain_batch;
  j["pretrain_seed"] = cfg.pretrain_seed;
  j["hidden"] = cfg.hidden;
  j["eval_samples"] = cfg.eval_samples;
  j["eval_seed"] = cfg.eval_seed;
  j["timing"] = cfg.timing;
  const auto& t = cfg.train;
  j["group_size"] = t.group_size;
  j["anchors_per_iter"] = t.anchors_per_iter;
  j["train_steps"] = t.train_steps;
  j["rollout_steps"] = t.rollout_steps;
  j["sigma"] = t.sigma;
  j["advantage_mode"] =
      t.advantage_mode == AdvantageMode::quasi_norm ? "quasi_norm" : "standard";
  j["p"] = t.p;
  j["clip_eps"] = t.clip_eps;
  j["beta_kl"] = t.beta_kl;
  j["lr"] = t.lr;
  j["max_grad_norm"] = t.max_grad_norm;
  j["iterations"] = t.iterations;
  j["rollout_solver"] = solver_name(t.rollout_solver);
  j["schedule_shift"] = t.schedule_shift;
  j["leap_temperature"] = t.leap_temperature;
  j["per_anchor_update"] = t.per_anchor_update;
  j["shared_step_set"] = t.shared_step_set;
  j["include_anchor_term"] = t.include_anchor_term;
  j["sample_std"] = t.sample_std;
  j["parallel_rollout"] = t.parallel_rollout;
  j["sde_noise_scale"] = t.sde_noise_scale;
  j["sde_eps_s"] = t.sde_eps_s;
  j["sde_sigma_clip"] = t.sde_sigma_clip;
  j["sde_window"] = t.sde_window;
  return j.dump(2) + "\n";
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: parse failure: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    auto get = [&j](const char* key, auto& into) {
      if (j.contains(key)) into = j.at(key).get<std::decay_t<decltype(into)>>();
    };
    get("schema_version", cfg.schema_version);
    get("task", cfg.task);
    get("reward", cfg.reward);
    get("variant", cfg.variant);
    get("conditional", cfg.conditional);
    get("seeds", cfg.seeds);
    get("out_dir", cfg.out_dir);
    get("checkpoint", cfg.checkpoint);
    get("dataset_size", cfg.dataset_size);
    get("dataset_seed", cfg.dataset_seed);
    get("pretrain_steps", cfg.pretrain_steps);
    get("pretrain_lr", cfg.pretrain_lr);
    get("pretrain_batch", cfg.pretrain_batch);
    get("pretrain_seed", cfg.pretrain_seed);
    get("hidden", cfg.hidden);
    get("eval_samples", cfg.eval_samples);
    get("eval_seed", cfg.eval_seed);
    get("timing", cfg.timing);
    auto& t = cfg.train;
    get("group_size", t.group_size);
    get("anchors_per_iter", t.anchors_per_iter);
    get("train_steps", t.train_steps);
    get("rollout_steps", t.rollout_steps);
    get("sigma", t.sigma);
    if (j.contains("advantage_mode")) {
      const auto m = j.at("advantage_mode").get<std::string>();
      if (m == "quasi_norm")
        t.advantage_mode = AdvantageMode::quasi_norm;
      else if (m == "standard")
        t.advantage_mode = AdvantageMode::standard;
      else
        throw ConfigError("config: unknown advantage_mode: " + m);
    }
    get("p", t.p);
    get("clip_eps", t.clip_eps);
    get("beta_kl", t.beta_kl);
    get("lr", t.lr);
    get("max_grad_norm", t.max_grad_norm);
    get("iterations", t.iterations);
    if (j.contains("rollout_solver"))
      t.rollout_solver = solver_from_name(j.at("rollout_solver").get<std::string>());
    get("schedule_shift", t.schedule_shift);
    get("leap_temperature", t.leap_temperature);
    get("per_anchor_update", t.per_anchor_update);
    get("shared_step_set", t.shared_step_set);
    get("include_anchor_term", t.include_anchor_term);
    get("sample_std", t.sample_std);
    get("parallel_rollout", t.parallel_rollout);
    get("sde_noise_scale", t.sde_noise_scale);
    get("sde_eps_s", t.sde_eps_s);
    get("sde_sigma_clip", t.sde_sigma_clip);
    get("sde_window", t.sde_window);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: bad field: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_config(text);
}

void save_config_file(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("config: cannot write " + path);
  out << serialize_config(cfg);
}

std::string config_hash(const ExperimentConfig& cfg) {
  // Identify the experiment, not its output location or timing cosmetics.
  ExperimentConfig canonical = cfg;
  canonical.out_dir.clear();
  canonical.timing = true;
  const std::string s = serialize_config(canonical);
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace ngrpo
