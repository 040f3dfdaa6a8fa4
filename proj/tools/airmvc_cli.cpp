#include "airmvc/experiment.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace {

using airmvc::ExperimentSpec;

// Flags that map one-to-one onto config keys; applied after the config file.
const std::vector<std::pair<std::string, std::string>> kFlagKeys = {
    {"--dataset", "dataset"},
    {"--noise-ratio", "noise_ratio"},
    {"--seed", "seed"},
    {"--repeats", "repeats"},
    {"--ablation", "ablation"},
    {"--out", "out"},
    {"--tau", "tau"},
    {"--alpha", "alpha"},
    {"--beta", "beta"},
    {"--lr", "learning_rate"},
    {"--epochs", "train_epochs"},
    {"--pretrain-epochs", "pretrain_epochs"},
    {"--batch-size", "batch_size"},
};

struct ExperimentFlags {
  std::string config;
  std::map<std::string, std::string> values;
  std::vector<std::string> overrides;
};

void add_experiment_flags(CLI::App* cmd, ExperimentFlags& flags) {
  cmd->add_option("--config", flags.config, "key = value settings file")
      ->check(CLI::ExistingFile);
  for (const auto& [flag, key] : kFlagKeys) {
    cmd->add_option(flag, flags.values[key], "sets '" + key + "'");
  }
  cmd->add_option("--set", flags.overrides, "extra key=value settings, applied last");
}

ExperimentSpec build_spec(const ExperimentFlags& flags, CLI::App* cmd) {
  ExperimentSpec spec;
  if (!flags.config.empty()) airmvc::apply_config_file(spec, flags.config);
  for (const auto& [flag, key] : kFlagKeys) {
    if (cmd->count(flag) > 0) airmvc::apply_setting(spec, key, flags.values.at(key));
  }
  for (const auto& kv : flags.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw airmvc::ConfigError(kv, "--set expects key=value");
    }
    airmvc::apply_setting(spec, kv.substr(0, eq), kv.substr(eq + 1));
  }
  spec.validate();
  return spec;
}

void report_failures(const std::vector<airmvc::RunFailure>& failures) {
  for (const auto& f : failures) {
    std::cerr << "failed run (noise_ratio=" << f.noise_ratio << ", seed=" << f.seed
              << "): " << f.message << '\n';
  }
}

int finish(const std::vector<airmvc::SweepRow>& rows) {
  bool ok = true;
  for (const auto& row : rows) {
    report_failures(row.result.failures);
    ok = ok && row.result.ok();
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noise-robust multi-view clustering experiments"};
  app.require_subcommand(1);

  ExperimentFlags run_flags, sweep_flags, ablate_flags;
  auto* run_cmd = app.add_subcommand("run", "train repeats and write per-run metrics");
  add_experiment_flags(run_cmd, run_flags);

  auto* sweep_cmd = app.add_subcommand("sweep", "run every noise ratio and tabulate");
  add_experiment_flags(sweep_cmd, sweep_flags);
  std::string ratios;
  sweep_cmd->add_option("--ratios", ratios, "comma-separated noise ratios");

  auto* ablate_cmd = app.add_subcommand("ablate", "compare full, no_dr, no_con, no_dr_con");
  add_experiment_flags(ablate_cmd, ablate_flags);

  auto* gen_cmd = app.add_subcommand("gen-synth", "write a synthetic dataset directory");
  airmvc::SyntheticSpec synth;
  std::string gen_out;
  double gen_noise = 0.0;
  std::uint64_t gen_noise_seed = 0;
  gen_cmd->add_option("--out", gen_out, "output directory")->required();
  gen_cmd->add_option("--samples", synth.samples)->capture_default_str();
  gen_cmd->add_option("--clusters", synth.clusters)->capture_default_str();
  gen_cmd->add_option("--views", synth.views)->capture_default_str();
  gen_cmd->add_option("--dims", synth.dims, "features per view")->capture_default_str();
  gen_cmd->add_option("--separation", synth.separation)->capture_default_str();
  gen_cmd->add_option("--seed", synth.seed)->capture_default_str();
  gen_cmd->add_option("--noise-ratio", gen_noise, "corrupt views 2..V")
      ->check(CLI::Range(0.0, 1.0));
  gen_cmd->add_option("--noise-seed", gen_noise_seed);

  auto* eval_cmd = app.add_subcommand("eval", "score saved assignments against labels");
  std::string assignments_file, labels_file;
  std::size_t eval_k = 0;
  eval_cmd->add_option("--assignments", assignments_file, "one cluster id per line")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--labels", labels_file, "one true label per line")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--clusters", eval_k, "cluster count (default: inferred)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      const ExperimentSpec spec = build_spec(run_flags, run_cmd);
      const auto result = airmvc::run_experiment(spec, &std::cout);
      report_failures(result.failures);
      return result.ok() ? 0 : 1;
    }
    if (*sweep_cmd) {
      if (!ratios.empty()) sweep_flags.overrides.push_back("ratios=" + ratios);
      const ExperimentSpec spec = build_spec(sweep_flags, sweep_cmd);
      const auto rows = airmvc::run_sweep(spec, &std::cout);
      std::cout << airmvc::markdown_table("noise ratio", rows);
      return finish(rows);
    }
    if (*ablate_cmd) {
      const ExperimentSpec spec = build_spec(ablate_flags, ablate_cmd);
      const auto rows = airmvc::run_ablation(spec, &std::cout);
      std::cout << airmvc::markdown_table("variant", rows);
      return finish(rows);
    }
    if (*gen_cmd) {
      ExperimentSpec spec;
      spec.synthetic = synth;
      spec.validate();
      airmvc::MultiViewDataset ds = airmvc::base_dataset(spec);
      if (gen_noise > 0.0) {
        airmvc::NoiseSpec noise;
        noise.ratio = gen_noise;
        noise.seed = gen_noise_seed;
        airmvc::NoisyDataset noisy = airmvc::inject_noise(ds, noise);
        ds = std::move(noisy.dataset);
        airmvc::save_dataset(ds, gen_out);
        for (std::size_t v = 0; v < noisy.mask.rows.size(); ++v) {
          std::string text;
          for (bool c : noisy.mask.rows[v]) text += c ? "1\n" : "0\n";
          airmvc::write_text_atomically(
              std::filesystem::path(gen_out) / ("corrupted_view" + std::to_string(v + 1) + ".csv"),
              text);
        }
      } else {
        airmvc::save_dataset(ds, gen_out);
      }
      std::cout << "wrote " << ds.num_views() << " views of " << ds.num_samples() << " samples to "
                << gen_out << '\n';
      return 0;
    }
    if (*eval_cmd) {
      const auto pred = airmvc::read_label_file(assignments_file);
      const auto truth = airmvc::read_label_file(labels_file);
      std::size_t k = eval_k;
      if (k == 0) {
        for (int l : pred) k = std::max(k, static_cast<std::size_t>(std::max(l, 0)) + 1);
        for (int l : truth) k = std::max(k, static_cast<std::size_t>(std::max(l, 0)) + 1);
      }
      const airmvc::MetricsReport m = airmvc::evaluate(pred, truth, k);
      std::cout << "acc,nmi,pur\n" << m.acc << ',' << m.nmi << ',' << m.pur << '\n';
      return 0;
    }
  } catch (const airmvc::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
