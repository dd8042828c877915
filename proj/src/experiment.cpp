// SPDX-License-Identifier: Apache-2.0

#include "ngrpo/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ngrpo/neighbor.hpp"
#include "ngrpo/sde_baseline.hpp"
#include "ngrpo/svg.hpp"

namespace ngrpo {

namespace fs = std::filesystem;

RewardFn make_reward(const ExperimentConfig& cfg, const Task& task) {
  RewardFn fn;
  fn.kind = reward_kind_from_name(cfg.reward);
  fn.mixture = task.mixture;
  fn.mode_index = 0;
  return fn;
}

VelocityModel prepare_base_model(const ExperimentConfig& cfg, bool write_checkpoint) {
  if (!cfg.checkpoint.empty()) {
    try {
      return VelocityModel::load_checkpoint(cfg.checkpoint);
    } catch (const std::runtime_error& e) {
      throw IoError(e.what());
    }
  }
  const Task task = make_task(cfg.task, cfg.dataset_size, cfg.dataset_seed,
                              cfg.conditional);
  RngStream rng(cfg.pretrain_seed);
  RngStream init_rng = rng.fork(0);
  VelocityModel model =
      VelocityModel::random_init(2, task.cond_dim, cfg.hidden, init_rng);
  PretrainOptions opts;
  opts.steps = cfg.pretrain_steps;
  opts.lr = cfg.pretrain_lr;
  opts.batch_size = cfg.pretrain_batch;
  RngStream train_rng = rng.fork(1);
  fm_pretrain(model, task.dataset.points, task.dataset.conds, train_rng, opts);
  if (write_checkpoint) {
    fs::create_directories(cfg.out_dir);
    model.save_checkpoint(cfg.out_dir + "/pretrained_" + cfg.task + ".json");
  }
  return model;
}

EvalStats evaluate_model(const VelocityModel& model, const ExperimentConfig& cfg,
                         const RewardFn& reward, int n) {
  const TimeSchedule schedule = TimeSchedule::uniform_shifted(
      cfg.train.rollout_steps, cfg.train.schedule_shift);
  RngStream eval_rng(cfg.eval_seed);
  EvalStats stats;
  stats.samples.resize(static_cast<std::size_t>(n));
  Vec rewards(static_cast<std::size_t>(n));
  std::vector<Vec> inits;
  inits.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) inits.push_back(gaussian_sample(eval_rng, model.data_dim()));
  const SolverKind solver = cfg.train.rollout_solver == SolverKind::sde
                                ? SolverKind::euler
                                : cfg.train.rollout_solver;
  const int cd = model.cond_dim();
  // Conditional models are evaluated on a balanced fixed condition bank:
  // sample i carries the one-hot index i mod cond_dim.
  const int chunks = cd > 0 ? cd : 1;
  for (int c = 0; c < chunks; ++c) {
    Vec cond;
    if (cd > 0) {
      cond.assign(static_cast<std::size_t>(cd), 0.0);
      cond[static_cast<std::size_t>(c)] = 1.0;
    }
    std::vector<Vec> chunk_inits;
    std::vector<int> slots;
    for (int i = c; i < n; i += chunks) {
      chunk_inits.push_back(inits[static_cast<std::size_t>(i)]);
      slots.push_back(i);
    }
    auto trajs = rollout_group(model, solver, schedule, chunk_inits, cond,
                               RngStream(cfg.eval_seed ^ 0x5a5a5a5aull),
                               cfg.train.parallel_rollout, nullptr);
    for (std::size_t k = 0; k < trajs.size(); ++k) {
      const auto slot = static_cast<std::size_t>(slots[k]);
      stats.samples[slot] = trajs[k].terminal();
      rewards[slot] = reward.eval(trajs[k].terminal(), cond);
    }
  }
  const auto [m, s] = mean_std(rewards);
  stats.mean = m;
  stats.stddev = s;
  return stats;
}

namespace {

// Fills `res` in place so a numerical abort still leaves the partial log
// with the caller.
void run_single_seed(const ExperimentConfig& cfg, const VelocityModel& base,
                     const Task& task, const RewardFn& reward, std::uint64_t seed,
                     const std::string& hash, SeedResult& res) {
  res.seed = seed;
  res.log.config_hash = hash;
  res.log.seed = seed;

  const auto pre = evaluate_model(base, cfg, reward, cfg.eval_samples);
  res.pretrain_reward_mean = pre.mean;
  res.pretrain_reward_std = pre.stddev;
  res.samples_before = pre.samples;

  PromptSampler prompts;
  if (cfg.conditional) {
    const GaussianMixture mix = task.mixture;
    const int cd = task.cond_dim;
    prompts = [mix, cd](RngStream& r) {
      Vec onehot(static_cast<std::size_t>(cd), 0.0);
      onehot[static_cast<std::size_t>(mix.sample_component(r))] = 1.0;
      return onehot;
    };
  } else {
    prompts = [](RngStream&) { return Vec{}; };
  }
  RewardFunction reward_fn = [&reward](const Vec& x0, const Vec& c) {
    return reward.eval(x0, c);
  };

  TrainLoopConfig tc = cfg.train;
  RngStream rng(seed);
  try {
    if (cfg.variant == "neighbor") {
      NeighborGrpoTrainer trainer(base, tc);
      for (int it = 0; it < tc.iterations; ++it) {
        auto m = trainer.iterate(it, prompts, reward_fn, rng);
        m.seed = seed;
        res.log.append(m);
      }
      const auto post = evaluate_model(trainer.model(), cfg, reward, cfg.eval_samples);
      res.final_reward_mean = post.mean;
      res.samples_after = post.samples;
    } else {
      if (cfg.variant == "sde") tc.sde_window = 0;
      SdeGrpoTrainer trainer(base, tc);
      for (int it = 0; it < tc.iterations; ++it) {
        auto m = trainer.iterate(it, prompts, reward_fn, rng);
        m.seed = seed;
        res.log.append(m);
      }
      const auto post = evaluate_model(trainer.model(), cfg, reward, cfg.eval_samples);
      res.final_reward_mean = post.mean;
      res.samples_after = post.samples;
    }
  } catch (const std::runtime_error& e) {
    throw NumericAbort(e.what());
  }
}

std::string seed_csv_path(const ExperimentConfig& cfg, std::uint64_t seed) {
  std::ostringstream os;
  os << cfg.out_dir << "/metrics_" << cfg.variant << "_seed" << seed << ".csv";
  return os.str();
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, bool write_artifacts) {
  cfg.validate();
  ExperimentResult result;
  result.config = cfg;
  result.config_hash = config_hash(cfg);

  const Task task =
      make_task(cfg.task, cfg.dataset_size, cfg.dataset_seed, cfg.conditional);
  const RewardFn reward = make_reward(cfg, task);
  const VelocityModel base = prepare_base_model(cfg, write_artifacts);

  if (write_artifacts) {
    fs::create_directories(cfg.out_dir);
    save_config_file(cfg, cfg.out_dir + "/config.json");
  }

  double total_ms = 0.0;
  long total_iters = 0;
  for (const std::uint64_t seed : cfg.seeds) {
    SeedResult sr;
    try {
      run_single_seed(cfg, base, task, reward, seed, result.config_hash, sr);
    } catch (const NumericAbort&) {
      // Keep whatever was logged before the abort, then surface the error.
      if (write_artifacts && !sr.log.rows.empty())
        sr.log.write_csv(seed_csv_path(cfg, seed) + ".partial", cfg.timing);
      throw;
    }
    for (const auto& row : sr.log.rows) total_ms += row.wall_ms;
    total_iters += static_cast<long>(sr.log.rows.size());
    if (write_artifacts) {
      sr.log.write_csv(seed_csv_path(cfg, seed), cfg.timing);
      write_samples_csv(sr.samples_before,
                        cfg.out_dir + "/samples_pre_" + cfg.variant + "_seed" +
                            std::to_string(seed) + ".csv",
                        result.config_hash, seed);
      write_samples_csv(sr.samples_after,
                        cfg.out_dir + "/samples_post_" + cfg.variant + "_seed" +
                            std::to_string(seed) + ".csv",
                        result.config_hash, seed);
    }
    result.seeds.push_back(std::move(sr));
  }
  result.wall_s_per_iter =
      total_iters > 0 ? total_ms / 1000.0 / static_cast<double>(total_iters) : 0.0;

  if (write_artifacts) {
    const std::string annotation =
        "config=" + result.config_hash + " variant=" + cfg.variant;
    std::vector<SvgSeries> series;
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
    for (std::size_t i = 0; i < result.seeds.size(); ++i) {
      SvgSeries s;
      s.label = "seed " + std::to_string(result.seeds[i].seed);
      s.color = colors[i % 5];
      s.ys = moving_average(result.seeds[i].log.reward_curve(), 20);
      series.push_back(std::move(s));
    }
    write_curve_svg(cfg.out_dir + "/reward_curve_" + cfg.variant + ".svg",
                    "mean group reward (MA20), " + cfg.variant, series, annotation);
    if (!result.seeds.empty()) {
      std::vector<SvgScatter> groups;
      groups.push_back({"before", "#9467bd", result.seeds.front().samples_before});
      groups.push_back({"after", "#d62728", result.seeds.front().samples_after});
      write_scatter_svg(cfg.out_dir + "/scatter_" + cfg.variant + "_seed" +
                            std::to_string(result.seeds.front().seed) + ".svg",
                        "terminal samples before/after, " + cfg.variant, groups,
                        annotation);
    }
  }
  return result;
}

NfeRow nfe_row(const std::string& label, int T, int G, int B, int K) {
  NfeRow r;
  r.label = label;
  r.rollout_steps = T;
  r.group_size = G;
  r.anchors = B;
  r.train_steps = K;
  r.nfe_old = static_cast<double>(T);
  r.nfe_theta = static_cast<double>(B) / static_cast<double>(G) * static_cast<double>(K);
  return r;
}

std::vector<NfeRow> nfe_reference_table() {
  return {
      nfe_row("sde-baseline 25-step", 25, 12, 12, 14),
      nfe_row("neighbor 25-step", 25, 12, 12, 4),
      nfe_row("neighbor 16-step", 16, 12, 4, 9),
      nfe_row("neighbor 8-step", 8, 12, 4, 4),
  };
}

NfeRow nfe_report(const ExperimentConfig& cfg) {
  const auto& t = cfg.train;
  const int B = cfg.variant == "neighbor" ? t.anchors_per_iter : t.group_size;
  return nfe_row(cfg.variant, t.rollout_steps, t.group_size, B, t.train_steps);
}

std::string format_nfe_table(const std::vector<NfeRow>& rows) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-24s %6s %4s %4s %4s %9s %9s\n", "config", "T",
                "G", "B", "K", "NFE_old", "NFE_theta");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-24s %6d %4d %4d %4d %9.2f %9.2f\n",
                  r.label.c_str(), r.rollout_steps, r.group_size, r.anchors,
                  r.train_steps, r.nfe_old, r.nfe_theta);
    os << buf;
  }
  return os.str();
}

std::vector<double> sweep_preset_values(const std::string& preset) {
  if (preset == "sigma") return {0.1, 0.3, 0.5, 1.0};
  if (preset == "anchors") return {2, 4, 8, 12};
  if (preset == "pnorm") return {0.5, 0.8, 1, 2};
  throw ConfigError("unknown sweep preset: " + preset);
}

std::vector<SweepEntry> run_sweep(const ExperimentConfig& base,
                                  const std::string& preset, bool write_artifacts) {
  const std::vector<double> values = sweep_preset_values(preset);
  std::vector<SweepEntry> entries;
  for (double v : values) {
    ExperimentConfig cfg = base;
    std::ostringstream tag;
    if (preset == "sigma") {
      cfg.train.sigma = v;
      tag << "sigma=" << v;
    } else if (preset == "anchors") {
      cfg.train.anchors_per_iter = static_cast<int>(v);
      tag << "B=" << static_cast<int>(v);
    } else {
      cfg.train.p = v;
      cfg.train.advantage_mode = AdvantageMode::quasi_norm;
      tag << "p=" << v;
    }
    cfg.out_dir = base.out_dir + "/" + preset + "_" + std::to_string(v);
    ExperimentResult res = run_experiment(cfg, write_artifacts);
    SweepEntry e;
    e.variant = cfg.variant;
    e.hyperparam = tag.str();
    double final_sum = 0.0, auc_sum = 0.0;
    for (const auto& sr : res.seeds) {
      final_sum += sr.final_reward_mean;
      const auto curve = sr.log.reward_curve();
      double auc = 0.0;
      for (double r : curve) auc += r;
      auc_sum += curve.empty() ? 0.0 : auc / static_cast<double>(curve.size());
    }
    const double n = static_cast<double>(res.seeds.size());
    e.final_mean_reward = final_sum / n;
    e.auc_reward = auc_sum / n;
    // timing=false keeps sweep output byte-stable, same as the metrics CSV
    e.wall_s_per_iter = cfg.timing ? res.wall_s_per_iter : 0.0;
    entries.push_back(std::move(e));
  }
  if (write_artifacts) {
    fs::create_directories(base.out_dir);
    std::ofstream out(base.out_dir + "/sweep_summary.csv");
    if (!out) throw IoError("sweep: cannot write summary");
    out << "variant,hyperparam,final_mean_reward,auc_reward,wall_s_per_iter\n";
    for (const auto& e : entries)
      out << e.variant << ',' << e.hyperparam << ',' << format_double(e.final_mean_reward)
          << ',' << format_double(e.auc_reward) << ',' << format_double(e.wall_s_per_iter)
          << "\n";
  }
  return entries;
}

void plot_metrics_csv(const std::vector<std::string>& csv_paths,
                      const std::string& out_svg) {
  std::vector<SvgSeries> series;
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::string annotation;
  for (std::size_t i = 0; i < csv_paths.size(); ++i) {
    MetricsLog log = MetricsLog::read_csv(csv_paths[i]);
    SvgSeries s;
    s.label = (log.rows.empty() ? "?" : log.rows.front().variant) + " seed " +
              std::to_string(log.seed);
    s.color = colors[i % 5];
    s.ys = moving_average(log.reward_curve(), 20);
    series.push_back(std::move(s));
    if (annotation.empty()) annotation = "config=" + log.config_hash;
  }
  write_curve_svg(out_svg, "mean group reward (MA20)", series, annotation);
}

}  // namespace ngrpo
