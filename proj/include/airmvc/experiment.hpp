#pragma once

#include "airmvc/dataset.hpp"
#include "airmvc/metrics.hpp"
#include "airmvc/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace airmvc {

/// Raised for unknown keys or unparsable values; `key()` names the culprit.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& message);
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct SyntheticSpec {
  std::size_t samples = 300;
  std::size_t clusters = 3;
  std::size_t views = 3;
  std::size_t dims = 64;
  double separation = 8.0;
  std::uint64_t seed = 0;
};

struct ExperimentSpec {
  /// Dataset directory; when absent the synthetic generator is used.
  std::optional<std::filesystem::path> dataset_dir;
  SyntheticSpec synthetic;
  NoiseSpec noise;
  /// Base noise seed; repeat r uses noise_seed + r. Follows train.seed when unset.
  std::optional<std::uint64_t> noise_seed;
  TrainConfig train;
  std::size_t repeats = 10;
  bool zscore = true;
  std::filesystem::path out_dir = "airmvc_out";
  std::vector<double> sweep_ratios = {0.1, 0.3, 0.5, 0.7, 0.9};

  void validate() const;
};

/// Applies one `key = value` setting. Keys mirror the field names
/// (alpha, learning_rate, noise_ratio, synth_dims, ...).
void apply_setting(ExperimentSpec& spec, std::string_view key, std::string_view value);

/// Flat text: one `key = value` per line, `#` starts a comment.
void apply_config_text(ExperimentSpec& spec, std::string_view text);
void apply_config_file(ExperimentSpec& spec, const std::filesystem::path& file);

/// Every recognized key, in documentation order.
const std::vector<std::string>& config_keys();

/// The clean (pre-noise) dataset the spec refers to.
MultiViewDataset base_dataset(const ExperimentSpec& spec);

struct RunFailure {
  double noise_ratio = 0.0;
  std::uint64_t seed = 0;
  std::string message;
};

struct MetricsSummary {
  std::size_t count = 0;
  double acc_mean = 0.0, acc_std = 0.0;
  double nmi_mean = 0.0, nmi_std = 0.0;
  double pur_mean = 0.0, pur_std = 0.0;
};

/// Population std over the runs; all zeros for an empty list.
MetricsSummary summarize(const std::vector<MetricsReport>& runs);

struct ExperimentResult {
  std::vector<MetricsReport> runs;
  MetricsSummary summary;
  std::vector<RunFailure> failures;

  bool ok() const { return failures.empty(); }
};

/// Repeats with seeds seed, seed+1, ...; writes runs.csv, summary.csv and a
/// `seed<k>/` folder per repeat (train.log, embeddings, phi, checkpoints).
ExperimentResult run_experiment(const ExperimentSpec& spec, std::ostream* progress = nullptr);

struct SweepRow {
  std::string label;
  ExperimentResult result;
};

/// One run_experiment per ratio under `<out>/ratio_<r>/`, then `<out>/table.md`.
std::vector<SweepRow> run_sweep(const ExperimentSpec& spec, std::ostream* progress = nullptr);

/// The four ablations under identical seeds in `<out>/<ablation>/`, then `<out>/table.md`.
std::vector<SweepRow> run_ablation(const ExperimentSpec& spec, std::ostream* progress = nullptr);

/// Markdown table with ACC/NMI/PUR as mean ± std per row.
std::string markdown_table(const std::string& first_column, const std::vector<SweepRow>& rows);

/// Writes through a sibling temp file and renames, so readers never see a partial file.
void write_file_atomically(const std::filesystem::path& file,
                           const std::function<void(const std::filesystem::path&)>& writer);
void write_text_atomically(const std::filesystem::path& file, const std::string& text);

/// One integer per line.
std::vector<int> read_label_file(const std::filesystem::path& file);

}  // namespace airmvc
