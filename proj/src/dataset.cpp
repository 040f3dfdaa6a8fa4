#include "airmvc/dataset.hpp"
#include "airmvc/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace airmvc {

namespace fs = std::filesystem;

void MultiViewDataset::validate() const {
  if (views.size() < 2) {
    throw DataError("dataset '" + name + "': need at least 2 views, got " +
                    std::to_string(views.size()));
  }
  const std::size_t n = views.front().rows();
  for (std::size_t v = 0; v < views.size(); ++v) {
    if (views[v].rows() != n) {
      throw DataError("dataset '" + name + "': view 1 has " + std::to_string(n) +
                      " rows but view " + std::to_string(v + 1) + " has " +
                      std::to_string(views[v].rows()));
    }
  }
  if (num_clusters == 0) throw DataError("dataset '" + name + "': cluster count is zero");
  if (labels) {
    if (labels->size() != n) {
      throw DataError("dataset '" + name + "': " + std::to_string(labels->size()) +
                      " labels for " + std::to_string(n) + " samples");
    }
    for (std::size_t i = 0; i < labels->size(); ++i) {
      const int l = (*labels)[i];
      if (l < 0 || static_cast<std::size_t>(l) >= num_clusters) {
        throw DataError("dataset '" + name + "': label " + std::to_string(l) + " at row " +
                        std::to_string(i + 1) + " outside [0, " +
                        std::to_string(num_clusters) + ")");
      }
    }
  }
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

double parse_cell(const std::string& cell, const fs::path& file, std::size_t row,
                  std::size_t col) {
  const std::string t = trim(cell);
  double value = 0.0;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (t.empty() || ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw DataError(file.string() + ": cannot parse '" + t + "' at row " + std::to_string(row) +
                    ", column " + std::to_string(col));
  }
  return value;
}

std::vector<std::string> read_lines(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open " + file.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    lines.push_back(line);
  }
  return lines;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Matrix read_csv_matrix(const fs::path& file) {
  const auto lines = read_lines(file);
  std::size_t cols = 0;
  std::vector<double> data;
  for (std::size_t r = 0; r < lines.size(); ++r) {
    std::stringstream ss(lines[r]);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      data.push_back(parse_cell(cell, file, r + 1, c + 1));
      ++c;
    }
    if (r == 0) {
      cols = c;
    } else if (c != cols) {
      throw DataError(file.string() + ": row " + std::to_string(r + 1) + " has " +
                      std::to_string(c) + " columns, expected " + std::to_string(cols));
    }
  }
  return Matrix::from_vector(lines.size(), cols, std::move(data));
}

void write_csv_matrix(const Matrix& m, const fs::path& file) {
  std::ofstream out(file);
  if (!out) throw DataError("cannot write " + file.string());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      out << format_double(row[c]);
    }
    out << '\n';
  }
}

MultiViewDataset load_dataset(const fs::path& directory) {
  if (!fs::is_directory(directory)) throw DataError("not a directory: " + directory.string());

  MultiViewDataset ds;
  ds.name = directory.filename().string();
  std::vector<fs::path> files;
  for (std::size_t v = 1;; ++v) {
    fs::path f = directory / ("view_" + std::to_string(v) + ".csv");
    if (!fs::exists(f)) break;
    ds.views.push_back(read_csv_matrix(f));
    files.push_back(f);
  }
  if (ds.views.empty()) throw DataError(directory.string() + ": no view_1.csv found");

  for (std::size_t v = 1; v < ds.views.size(); ++v) {
    if (ds.views[v].rows() != ds.views[0].rows()) {
      throw DataError("inconsistent row counts: " + files[0].string() + " has " +
                      std::to_string(ds.views[0].rows()) + " rows, " + files[v].string() +
                      " has " + std::to_string(ds.views[v].rows()));
    }
  }

  const fs::path labels_file = directory / "labels.csv";
  if (fs::exists(labels_file)) {
    const auto lines = read_lines(labels_file);
    std::vector<int> labels;
    labels.reserve(lines.size());
    for (std::size_t r = 0; r < lines.size(); ++r) {
      const double v = parse_cell(lines[r], labels_file, r + 1, 1);
      if (v != std::floor(v)) {
        throw DataError(labels_file.string() + ": non-integer label at row " +
                        std::to_string(r + 1));
      }
      labels.push_back(static_cast<int>(v));
    }
    if (labels.size() != ds.views[0].rows()) {
      throw DataError("inconsistent row counts: " + files[0].string() + " has " +
                      std::to_string(ds.views[0].rows()) + " rows, " + labels_file.string() +
                      " has " + std::to_string(labels.size()));
    }
    ds.labels = std::move(labels);
  }

  const fs::path meta_file = directory / "meta.txt";
  if (fs::exists(meta_file)) {
    for (const auto& line : read_lines(meta_file)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = trim(std::string_view(line).substr(0, eq));
      const std::string value = trim(std::string_view(line).substr(eq + 1));
      if (key == "clusters") {
        ds.num_clusters = static_cast<std::size_t>(parse_cell(value, meta_file, 1, 1));
      } else if (key == "name") {
        ds.name = value;
      }
    }
  }
  if (ds.num_clusters == 0 && ds.labels && !ds.labels->empty()) {
    ds.num_clusters =
        static_cast<std::size_t>(*std::max_element(ds.labels->begin(), ds.labels->end()) + 1);
  }
  if (ds.num_clusters == 0) {
    throw DataError(directory.string() + ": cluster count missing from meta.txt and no labels");
  }
  ds.validate();
  return ds;
}

void save_dataset(const MultiViewDataset& dataset, const fs::path& directory) {
  fs::create_directories(directory);
  for (std::size_t v = 0; v < dataset.views.size(); ++v) {
    write_csv_matrix(dataset.views[v], directory / ("view_" + std::to_string(v + 1) + ".csv"));
  }
  if (dataset.labels) {
    std::ofstream out(directory / "labels.csv");
    for (int l : *dataset.labels) out << l << '\n';
  }
  std::ofstream meta(directory / "meta.txt");
  meta << "clusters=" << dataset.num_clusters << '\n';
  meta << "name=" << dataset.name << '\n';
}

MultiViewDataset synth_blobs(std::size_t num_samples, std::size_t num_clusters,
                             const std::vector<std::size_t>& dims_per_view, double separation,
                             std::uint64_t seed) {
  if (num_samples == 0 || num_clusters == 0 || dims_per_view.empty()) {
    throw std::invalid_argument("synth_blobs: counts must be positive");
  }
  auto rng = make_rng({seed});
  std::normal_distribution<double> normal(0.0, 1.0);

  MultiViewDataset ds;
  ds.num_clusters = num_clusters;
  ds.name = "synth_blobs";
  std::vector<int> labels(num_samples);
  for (std::size_t i = 0; i < num_samples; ++i) labels[i] = static_cast<int>(i % num_clusters);

  for (std::size_t dim : dims_per_view) {
    if (dim == 0) throw std::invalid_argument("synth_blobs: view dimension must be positive");
    const double scale = separation / std::sqrt(static_cast<double>(dim));
    Matrix centers(num_clusters, dim);
    for (auto& c : centers.values()) c = scale * normal(rng);
    Matrix x(num_samples, dim);
    for (std::size_t i = 0; i < num_samples; ++i) {
      auto center = centers.row(static_cast<std::size_t>(labels[i]));
      auto row = x.row(i);
      for (std::size_t d = 0; d < dim; ++d) row[d] = center[d] + normal(rng);
    }
    ds.views.push_back(std::move(x));
  }
  ds.labels = std::move(labels);
  return ds;
}

std::size_t CorruptionMask::count(std::size_t view) const {
  return static_cast<std::size_t>(std::count(rows[view].begin(), rows[view].end(), true));
}

NoisyDataset inject_noise(const MultiViewDataset& dataset, const NoiseSpec& spec) {
  if (!(spec.ratio >= 0.0 && spec.ratio <= 1.0)) {
    throw std::invalid_argument("inject_noise: ratio must lie in [0, 1]");
  }
  const std::size_t n = dataset.num_samples();
  const std::size_t v_count = dataset.num_views();

  std::vector<std::size_t> targets = spec.corrupted_views;
  if (targets.empty()) {
    for (std::size_t v = 1; v < v_count; ++v) targets.push_back(v);
  }
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  for (std::size_t v : targets) {
    if (v >= v_count) {
      throw std::invalid_argument("inject_noise: view index " + std::to_string(v + 1) +
                                  " out of range");
    }
    if (v == 0 && !spec.allow_first_view) {
      throw std::invalid_argument(
          "inject_noise: corrupting view 1 requires allow_first_view (it is the clean anchor)");
    }
  }

  NoisyDataset out{dataset, {}};
  out.mask.rows.assign(v_count, std::vector<bool>(n, false));
  const auto count = static_cast<std::size_t>(std::llround(spec.ratio * static_cast<double>(n)));
  if (count == 0) return out;

  for (std::size_t v : targets) {
    auto rng = make_rng({spec.seed, static_cast<std::uint64_t>(v)});

    const Matrix& original = dataset.views[v];
    const std::size_t d = original.cols();
    std::vector<double> mean(d, 0.0), stddev(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < d; ++c) mean[c] += original(i, c);
    for (auto& m : mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = original(i, c) - mean[c];
        stddev[c] += diff * diff;
      }
    for (auto& s : stddev) s = std::sqrt(s / static_cast<double>(n));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(count);
    std::sort(order.begin(), order.end());

    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix& view = out.dataset.views[v];
    for (std::size_t i : order) {
      out.mask.rows[v][i] = true;
      auto row = view.row(i);
      for (std::size_t c = 0; c < d; ++c) row[c] = mean[c] + stddev[c] * normal(rng);
    }
  }
  return out;
}

MultiViewDataset zscore_normalize(const MultiViewDataset& dataset) {
  MultiViewDataset out = dataset;
  for (auto& view : out.views) {
    const std::size_t n = view.rows();
    if (n == 0) continue;
    for (std::size_t c = 0; c < view.cols(); ++c) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += view(i, c);
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (std::size_t i = 0; i < n; ++i) var += (view(i, c) - mean) * (view(i, c) - mean);
      const double sd = std::sqrt(var / static_cast<double>(n));
      for (std::size_t i = 0; i < n; ++i) {
        view(i, c) = sd > 1e-12 ? (view(i, c) - mean) / sd : 0.0;
      }
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> minibatch_iter(std::size_t num_samples,
                                                     std::size_t batch_size, std::uint64_t seed,
                                                     std::uint64_t epoch) {
  if (batch_size == 0) throw std::invalid_argument("minibatch_iter: batch_size must be >= 1");
  std::vector<std::size_t> order(num_samples);
  std::iota(order.begin(), order.end(), 0);
  auto rng = make_rng({seed, epoch});
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < num_samples; start += batch_size) {
    const std::size_t stop = std::min(num_samples, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return batches;
}

}  // namespace airmvc
