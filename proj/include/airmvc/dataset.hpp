#pragma once

#include "airmvc/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace airmvc {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// V aligned feature matrices over the same N samples.
struct MultiViewDataset {
  std::vector<Matrix> views;
  std::optional<std::vector<int>> labels;
  std::size_t num_clusters = 0;
  std::string name;

  std::size_t num_views() const { return views.size(); }
  std::size_t num_samples() const { return views.empty() ? 0 : views.front().rows(); }

  /// Throws DataError when an invariant is broken.
  void validate() const;
};

/// Reads `view_<v>.csv` (1-based), optional `labels.csv`, optional `meta.txt`.
MultiViewDataset load_dataset(const std::filesystem::path& directory);

/// Writes the directory layout read by load_dataset; values use round-trip precision.
void save_dataset(const MultiViewDataset& dataset, const std::filesystem::path& directory);

Matrix read_csv_matrix(const std::filesystem::path& file);
void write_csv_matrix(const Matrix& m, const std::filesystem::path& file);

/// Balanced Gaussian blobs: label i % K, per-view centers with expected norm
/// `separation`, unit isotropic noise around each center.
MultiViewDataset synth_blobs(std::size_t num_samples, std::size_t num_clusters,
                             const std::vector<std::size_t>& dims_per_view, double separation,
                             std::uint64_t seed);

enum class NoiseModel { gaussian_replace };

struct NoiseSpec {
  double ratio = 0.0;
  std::uint64_t seed = 0;
  /// 0-based view indices; empty means every view except the first.
  std::vector<std::size_t> corrupted_views;
  NoiseModel model = NoiseModel::gaussian_replace;
  /// Required to corrupt view 0, which rectification treats as the clean anchor.
  bool allow_first_view = false;
};

/// Per-view flags of corrupted rows.
struct CorruptionMask {
  std::vector<std::vector<bool>> rows;

  bool corrupted(std::size_t view, std::size_t sample) const { return rows[view][sample]; }
  std::size_t count(std::size_t view) const;
};

struct NoisyDataset {
  MultiViewDataset dataset;
  CorruptionMask mask;
};

NoisyDataset inject_noise(const MultiViewDataset& dataset, const NoiseSpec& spec);

/// Per-column standardization with the population std; constant columns become 0.
MultiViewDataset zscore_normalize(const MultiViewDataset& dataset);

/// Seeded permutation of [0, N) for the given epoch, chunked into batches.
std::vector<std::vector<std::size_t>> minibatch_iter(std::size_t num_samples,
                                                     std::size_t batch_size, std::uint64_t seed,
                                                     std::uint64_t epoch);

}  // namespace airmvc
