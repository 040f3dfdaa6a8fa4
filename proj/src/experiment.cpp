#include "airmvc/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace airmvc {

namespace fs = std::filesystem;

ConfigError::ConfigError(std::string key, const std::string& message)
    : std::invalid_argument("config key '" + key + "': " + message), key_(std::move(key)) {}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

double to_double(std::string_view key, std::string_view raw) {
  const std::string text = trim(raw);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size() || text.empty() || !std::isfinite(v)) {
    throw ConfigError(std::string(key), "expected a number, got '" + text + "'");
  }
  return v;
}

std::uint64_t to_unsigned(std::string_view key, std::string_view raw) {
  const std::string text = trim(raw);
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size() || text.empty()) {
    throw ConfigError(std::string(key), "expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

std::size_t to_count(std::string_view key, std::string_view raw) {
  return static_cast<std::size_t>(to_unsigned(key, raw));
}

bool to_bool(std::string_view key, std::string_view raw) {
  std::string text = trim(raw);
  std::transform(text.begin(), text.end(), text.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError(std::string(key), "expected true or false, got '" + text + "'");
}

std::vector<std::string> split_list(std::string_view raw) {
  std::vector<std::string> items;
  std::string current;
  for (char c : raw) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!current.empty()) items.push_back(std::move(current));
      current.clear();
    } else {
      current += c;
    }
  }
  if (!current.empty()) items.push_back(std::move(current));
  return items;
}

using Setter = void (*)(ExperimentSpec&, std::string_view key, std::string_view value);

const std::vector<std::pair<std::string, Setter>>& setters() {
  static const std::vector<std::pair<std::string, Setter>> table = {
      {"dataset", [](ExperimentSpec& s, std::string_view, std::string_view v) {
         const std::string path = trim(v);
         if (path.empty()) s.dataset_dir.reset();
         else s.dataset_dir = fs::path(path);
       }},
      {"out", [](ExperimentSpec& s, std::string_view, std::string_view v) {
         s.out_dir = fs::path(trim(v));
       }},
      {"repeats", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         s.repeats = to_count(k, v);
       }},
      {"zscore", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         s.zscore = to_bool(k, v);
       }},
      {"ratios", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         s.sweep_ratios.clear();
         for (const auto& item : split_list(v)) s.sweep_ratios.push_back(to_double(k, item));
       }},

      {"alpha", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         s.train.alpha = to_double(k, v);
       }},
      {"beta", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         s.train.beta = to_double(k, v);
       }},
      {"tau", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         s.train.tau = to_double(k, v);
       }},
      {"learning_rate", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         s.train.learning_rate = to_double(k, v);
       }},
      {"pretrain_epochs", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         s.train.pretrain_epochs = to_count(k, v);
       }},
      {"train_epochs", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         s.train.train_epochs = to_count(k, v);
       }},
      {"batch_size", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         s.train.batch_size = to_count(k, v);
       }},
      {"seed", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         s.train.seed = to_unsigned(k, v);
       }},
      {"ablation", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         try {
           s.train.ablation = parse_ablation(trim(v));
         } catch (const std::invalid_argument& e) {
           throw ConfigError(std::string(k), e.what());
         }
       }},
      {"hidden_dim", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         s.train.hidden_dim = to_count(k, v);
       }},
      {"latent_dim", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         s.train.latent_dim = to_count(k, v);
       }},
      {"similarity_clamp", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         s.train.similarity_clamp = to_double(k, v);
       }},
      {"centroid_head_init", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         s.train.centroid_head_init = to_bool(k, v);
       }},
      {"head_init_scale", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         s.train.head_init_scale = to_double(k, v);
       }},
      {"phi_weighted_fusion", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         s.train.phi_weighted_fusion = to_bool(k, v);
       }},
      {"checkpoint_every", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         s.train.checkpoint_every = to_count(k, v);
       }},

      {"noise_ratio", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         s.noise.ratio = to_double(k, v);
       }},
      {"noise_seed", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         s.noise_seed = to_unsigned(k, v);
       }},
      {"corrupted_views", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         // 1-based in the file, like the view_<v>.csv names
         s.noise.corrupted_views.clear();
         for (const auto& item : split_list(v)) {
           const std::size_t view = to_count(k, item);
           if (view == 0) throw ConfigError(std::string(k), "views are numbered from 1");
           s.noise.corrupted_views.push_back(view - 1);
         }
       }},
      {"noise_model", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         if (trim(v) != "gaussian_replace") {
           throw ConfigError(std::string(k), "only gaussian_replace is supported");
         }
         s.noise.model = NoiseModel::gaussian_replace;
       }},
      {"allow_first_view", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         s.noise.allow_first_view = to_bool(k, v);
       }},

      {"synth_samples", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         s.synthetic.samples = to_count(k, v);
       }},
      {"synth_clusters", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         s.synthetic.clusters = to_count(k, v);
       }},
      {"synth_views", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         s.synthetic.views = to_count(k, v);
       }},
      {"synth_dims", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         s.synthetic.dims = to_count(k, v);
       }},
      {"synth_separation", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         s.synthetic.separation = to_double(k, v);
       }},
      {"synth_seed", [](ExperimentSpec& s, std::string_view k, std::string_view v) {
         s.synthetic.seed = to_unsigned(k, v);
       }},
  };
  return table;
}

double mean_of(const std::vector<MetricsReport>& runs, double MetricsReport::*field) {
  double sum = 0.0;
  for (const auto& r : runs) sum += r.*field;
  return sum / static_cast<double>(runs.size());
}

double std_of(const std::vector<MetricsReport>& runs, double MetricsReport::*field, double mean) {
  double sum = 0.0;
  for (const auto& r : runs) sum += (r.*field - mean) * (r.*field - mean);
  return std::sqrt(sum / static_cast<double>(runs.size()));
}

std::string ratio_label(double r) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", r);
  return buf;
}

void write_run_artifacts(const fs::path& dir, const TrainOutcome& outcome,
                         const MultiViewDataset& data, const CorruptionMask& mask) {
  const DatasetForward fwd = forward_dataset(outcome.state.model, data);
  for (std::size_t v = 0; v < data.num_views(); ++v) {
    const std::string suffix = std::to_string(v + 1) + ".csv";
    write_file_atomically(dir / ("embeddings_view" + suffix),
                          [&](const fs::path& tmp) { write_csv_matrix(fwd.z[v], tmp); });

    std::vector<double> scores = outcome.state.clean_scores[v];
    if (scores.size() != data.num_samples()) {
      scores.assign(data.num_samples(), std::numeric_limits<double>::quiet_NaN());
    }
    std::optional<std::vector<bool>> corrupted;
    if (v < mask.rows.size()) corrupted = mask.rows[v];
    write_file_atomically(dir / ("phi_view" + suffix), [&](const fs::path& tmp) {
      write_phi_diagnostics(tmp, scores, outcome.state.phi[v], corrupted);
    });
  }
}

}  // namespace

void ExperimentSpec::validate() const {
  if (repeats == 0) throw ConfigError("repeats", "must be at least 1");
  if (!(noise.ratio >= 0.0 && noise.ratio <= 1.0)) {
    throw ConfigError("noise_ratio", "must lie in [0, 1]");
  }
  for (double r : sweep_ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("ratios", "each ratio must lie in [0, 1]");
  }
  if (out_dir.empty()) throw ConfigError("out", "output directory is empty");
  if (!dataset_dir) {
    if (synthetic.samples == 0) throw ConfigError("synth_samples", "must be positive");
    if (synthetic.clusters == 0) throw ConfigError("synth_clusters", "must be positive");
    if (synthetic.views < 2) throw ConfigError("synth_views", "needs at least 2 views");
    if (synthetic.dims == 0) throw ConfigError("synth_dims", "must be positive");
  }
  try {
    train.validate();
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    throw ConfigError(what.substr(0, what.find(' ')), what);
  }
}

void apply_setting(ExperimentSpec& spec, std::string_view key, std::string_view value) {
  const std::string k = trim(key);
  for (const auto& [name, set] : setters()) {
    if (name == k) {
      set(spec, name, value);
      return;
    }
  }
  throw ConfigError(k, "unknown key");
}

void apply_config_text(ExperimentSpec& spec, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(trim(line),
                        "line " + std::to_string(line_no) + " is not of the form key = value");
    }
    apply_setting(spec, line.substr(0, eq), line.substr(eq + 1));
  }
}

void apply_config_file(ExperimentSpec& spec, const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open config " + file.string());
  std::ostringstream text;
  text << in.rdbuf();
  apply_config_text(spec, text.str());
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& [name, set] : setters()) out.push_back(name);
    return out;
  }();
  return keys;
}

MultiViewDataset base_dataset(const ExperimentSpec& spec) {
  if (spec.dataset_dir) return load_dataset(*spec.dataset_dir);
  const SyntheticSpec& s = spec.synthetic;
  return synth_blobs(s.samples, s.clusters, std::vector<std::size_t>(s.views, s.dims),
                     s.separation, s.seed);
}

MetricsSummary summarize(const std::vector<MetricsReport>& runs) {
  MetricsSummary s;
  s.count = runs.size();
  if (runs.empty()) return s;
  s.acc_mean = mean_of(runs, &MetricsReport::acc);
  s.nmi_mean = mean_of(runs, &MetricsReport::nmi);
  s.pur_mean = mean_of(runs, &MetricsReport::pur);
  s.acc_std = std_of(runs, &MetricsReport::acc, s.acc_mean);
  s.nmi_std = std_of(runs, &MetricsReport::nmi, s.nmi_mean);
  s.pur_std = std_of(runs, &MetricsReport::pur, s.pur_mean);
  return s;
}

ExperimentResult run_experiment(const ExperimentSpec& spec, std::ostream* progress) {
  spec.validate();
  const MultiViewDataset clean = base_dataset(spec);
  if (!clean.labels) {
    throw DataError(clean.name + ": labels.csv is required to score runs");
  }
  fs::create_directories(spec.out_dir);

  ExperimentResult result;
  const std::uint64_t noise_base = spec.noise_seed.value_or(spec.train.seed);
  for (std::size_t r = 0; r < spec.repeats; ++r) {
    TrainConfig config = spec.train;
    config.seed = spec.train.seed + r;
    NoiseSpec noise = spec.noise;
    noise.seed = noise_base + r;
    const fs::path dir = spec.out_dir / ("seed" + std::to_string(config.seed));
    try {
      NoisyDataset noisy = inject_noise(clean, noise);
      const MultiViewDataset data = spec.zscore ? zscore_normalize(noisy.dataset) : noisy.dataset;
      fs::create_directories(dir);
      std::ostringstream log;
      TrainOptions options;
      options.checkpoint_dir = dir / "checkpoints";
      options.log = &log;
      const TrainOutcome outcome = train(data, config, options);
      write_text_atomically(dir / "train.log", log.str());
      write_run_artifacts(dir, outcome, data, noisy.mask);

      MetricsReport m = *outcome.metrics;
      m.noise_ratio = noise.ratio;
      result.runs.push_back(m);
      if (progress) {
        *progress << "seed " << config.seed << ": acc=" << m.acc << " nmi=" << m.nmi
                  << " pur=" << m.pur << '\n';
      }
    } catch (const std::exception& e) {
      result.failures.push_back({noise.ratio, config.seed, e.what()});
      if (progress) *progress << "seed " << config.seed << ": FAILED " << e.what() << '\n';
    }
  }

  std::string runs_csv = std::string(kMetricsCsvHeader) + '\n';
  for (const auto& m : result.runs) runs_csv += to_csv_row(m) + '\n';
  write_text_atomically(spec.out_dir / "runs.csv", runs_csv);

  result.summary = summarize(result.runs);
  const MetricsSummary& s = result.summary;
  char row[512];
  std::snprintf(row, sizeof(row), "%s,%.17g,%s,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                clean.name.c_str(), spec.noise.ratio, to_string(spec.train.ablation).c_str(),
                s.count, s.acc_mean, s.acc_std, s.nmi_mean, s.nmi_std, s.pur_mean, s.pur_std);
  write_text_atomically(
      spec.out_dir / "summary.csv",
      std::string("dataset,noise_ratio,ablation,runs,acc_mean,acc_std,nmi_mean,nmi_std,"
                  "pur_mean,pur_std\n") +
          row);
  return result;
}

std::vector<SweepRow> run_sweep(const ExperimentSpec& spec, std::ostream* progress) {
  spec.validate();
  std::vector<SweepRow> rows;
  for (double ratio : spec.sweep_ratios) {
    ExperimentSpec one = spec;
    one.noise.ratio = ratio;
    one.out_dir = spec.out_dir / ("ratio_" + ratio_label(ratio));
    if (progress) *progress << "noise ratio " << ratio_label(ratio) << '\n';
    rows.push_back({ratio_label(ratio), run_experiment(one, progress)});
  }
  write_text_atomically(spec.out_dir / "table.md", markdown_table("noise ratio", rows));
  return rows;
}

std::vector<SweepRow> run_ablation(const ExperimentSpec& spec, std::ostream* progress) {
  spec.validate();
  std::vector<SweepRow> rows;
  for (Ablation a : {Ablation::full, Ablation::no_dr, Ablation::no_con, Ablation::no_dr_con}) {
    ExperimentSpec one = spec;
    one.train.ablation = a;
    one.out_dir = spec.out_dir / to_string(a);
    if (progress) *progress << "ablation " << to_string(a) << '\n';
    rows.push_back({to_string(a), run_experiment(one, progress)});
  }
  write_text_atomically(spec.out_dir / "table.md", markdown_table("variant", rows));
  return rows;
}

std::string markdown_table(const std::string& first_column, const std::vector<SweepRow>& rows) {
  std::string out = "| " + first_column + " | ACC | NMI | PUR | runs |\n|---|---|---|---|---|\n";
  char buf[256];
  for (const auto& row : rows) {
    const MetricsSummary& s = row.result.summary;
    std::snprintf(buf, sizeof(buf), "| %s | %.2f ± %.2f | %.2f ± %.2f | %.2f ± %.2f | %zu |\n",
                  row.label.c_str(), 100 * s.acc_mean, 100 * s.acc_std, 100 * s.nmi_mean,
                  100 * s.nmi_std, 100 * s.pur_mean, 100 * s.pur_std, s.count);
    out += buf;
  }
  return out;
}

void write_file_atomically(const fs::path& file,
                           const std::function<void(const fs::path&)>& writer) {
  fs::path temp = file;
  temp += ".tmp";
  try {
    writer(temp);
  } catch (...) {
    std::error_code ignored;
    fs::remove(temp, ignored);
    throw;
  }
  fs::rename(temp, file);
}

void write_text_atomically(const fs::path& file, const std::string& text) {
  write_file_atomically(file, [&](const fs::path& tmp) {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  });
}

std::vector<int> read_label_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open " + file.string());
  std::vector<int> labels;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const std::string t = trim(line);
    if (t.empty()) continue;
    int v = 0;
    const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || end != t.data() + t.size()) {
      throw DataError(file.string() + ": non-integer label at row " + std::to_string(row));
    }
    labels.push_back(v);
  }
  return labels;
}

}  // namespace airmvc
