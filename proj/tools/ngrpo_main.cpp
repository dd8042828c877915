// SPDX-License-Identifier: Apache-2.0
//
// ngrpo command line: pretrain, train, sweep, nfe, plot, verify.
// Exit codes: 0 success, 1 config error, 2 numerical abort, 3 IO error.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ngrpo/experiment.hpp"
#include "ngrpo/verify.hpp"

namespace {

ngrpo::ExperimentConfig load_or_default(const std::string& config_path) {
  if (config_path.empty()) {
    ngrpo::ExperimentConfig cfg;
    cfg.validate();
    return cfg;
  }
  return ngrpo::load_config_file(config_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neighbor GRPO laboratory for toy rectified flows"};
  app.require_subcommand(1);

  std::string config_path, out_path, variant, preset, samples_csv;
  std::vector<std::string> csv_inputs;
  std::uint64_t seed = 0;
  bool seed_set = false, quick = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON experiment config");
    sub->add_option("--out", out_path, "output directory or file");
    sub->add_option("--variant", variant, "neighbor | sde | sde_windowed");
    sub->add_option("--seed", seed, "override: run this single seed")
        ->each([&](const std::string&) { seed_set = true; });
  };

  CLI::App* cmd_pretrain = app.add_subcommand("pretrain", "flow-matching pretraining");
  add_common(cmd_pretrain);
  CLI::App* cmd_train = app.add_subcommand("train", "run the selected trainer");
  add_common(cmd_train);
  CLI::App* cmd_sweep = app.add_subcommand("sweep", "preset ablation sweep");
  add_common(cmd_sweep);
  cmd_sweep->add_option("--preset", preset, "sigma | anchors | pnorm")->required();
  CLI::App* cmd_nfe = app.add_subcommand("nfe", "print the NFE cost table");
  add_common(cmd_nfe);
  CLI::App* cmd_plot = app.add_subcommand("plot", "reward-curve SVG from metrics CSVs");
  cmd_plot->add_option("--csv", csv_inputs, "metrics CSV path(s)")->required();
  cmd_plot->add_option("--out", out_path, "output SVG")->required();
  cmd_plot->add_option("--samples", samples_csv, "optional samples CSV for a scatter");
  CLI::App* cmd_verify = app.add_subcommand("verify", "run the verification suite");
  add_common(cmd_verify);
  cmd_verify->add_flag("--quick", quick, "skip the end-to-end training checks");

  CLI11_PARSE(app, argc, argv);

  try {
    ngrpo::ExperimentConfig cfg;
    if (!app.got_subcommand(cmd_plot)) {
      cfg = load_or_default(config_path);
      if (!variant.empty()) cfg.variant = variant;
      if (seed_set) cfg.seeds = {seed};
      if (!out_path.empty()) cfg.out_dir = out_path;
      cfg.validate();
    }

    if (app.got_subcommand(cmd_pretrain)) {
      const auto model = ngrpo::prepare_base_model(cfg, /*write_checkpoint=*/true);
      std::printf("pretrained %s: %lld parameters -> %s/pretrained_%s.json\n",
                  cfg.task.c_str(), static_cast<long long>(model.param_count()),
                  cfg.out_dir.c_str(), cfg.task.c_str());
    } else if (app.got_subcommand(cmd_train)) {
      const auto result = ngrpo::run_experiment(cfg, true);
      for (const auto& sr : result.seeds)
        std::printf("seed %llu: pretrain reward %.4f (std %.4f) -> final %.4f\n",
                    static_cast<unsigned long long>(sr.seed), sr.pretrain_reward_mean,
                    sr.pretrain_reward_std, sr.final_reward_mean);
      std::printf("config %s, %.3f s/iter, artifacts in %s\n",
                  result.config_hash.c_str(), result.wall_s_per_iter,
                  cfg.out_dir.c_str());
    } else if (app.got_subcommand(cmd_sweep)) {
      const auto entries = ngrpo::run_sweep(cfg, preset, true);
      std::printf("%-10s %-12s %12s %12s %12s\n", "variant", "hyperparam",
                  "final_reward", "auc_reward", "s/iter");
      for (const auto& e : entries)
        std::printf("%-10s %-12s %12.4f %12.4f %12.4f\n", e.variant.c_str(),
                    e.hyperparam.c_str(), e.final_mean_reward, e.auc_reward,
                    e.wall_s_per_iter);
    } else if (app.got_subcommand(cmd_nfe)) {
      auto rows = ngrpo::nfe_reference_table();
      if (!config_path.empty()) rows.push_back(ngrpo::nfe_report(cfg));
      std::fputs(ngrpo::format_nfe_table(rows).c_str(), stdout);
    } else if (app.got_subcommand(cmd_plot)) {
      ngrpo::plot_metrics_csv(csv_inputs, out_path);
      std::printf("wrote %s\n", out_path.c_str());
    } else if (app.got_subcommand(cmd_verify)) {
      ngrpo::VerifyOptions opts;
      opts.include_slow = !quick;
      opts.out_dir = out_path.empty() ? "out/verify" : out_path;
      const int failures = ngrpo::report_checks(ngrpo::run_verification(opts));
      return failures == 0 ? 0 : 2;
    }
    return 0;
  } catch (const ngrpo::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const ngrpo::NumericAbort& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return 2;
  } catch (const ngrpo::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  }
}
