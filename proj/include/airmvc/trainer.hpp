#pragma once

#include "airmvc/dataset.hpp"
#include "airmvc/layers.hpp"
#include "airmvc/losses.hpp"
#include "airmvc/metrics.hpp"
#include "airmvc/networks.hpp"
#include "airmvc/noise_gmm.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace airmvc {

/// Which loss terms are switched off.
enum class Ablation { full, no_dr, no_con, no_dr_con };

std::string to_string(Ablation a);
Ablation parse_ablation(const std::string& text);

struct TrainConfig {
  double alpha = 1.0;
  double beta = 1.0;
  double tau = 0.8;
  double learning_rate = 1e-4;
  std::size_t pretrain_epochs = 100;
  std::size_t train_epochs = 400;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  Ablation ablation = Ablation::full;

  std::size_t hidden_dim = 256;
  std::size_t latent_dim = 64;
  double similarity_clamp = kDefaultSimilarityClamp;
  /// Initialize classifier heads from first-view k-means after pretraining.
  bool centroid_head_init = true;
  /// Sharpness of the centroid-initialized classifier heads (logit scale).
  double head_init_scale = 1.5;
  /// Weight each view's prediction by its clean probability when fusing.
  bool phi_weighted_fusion = false;
  std::size_t checkpoint_every = 50;

  bool rectification_enabled() const {
    return ablation == Ablation::full || ablation == Ablation::no_con;
  }
  bool contrastive_enabled() const {
    return ablation == Ablation::full || ablation == Ablation::no_dr;
  }

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpochLog {
  std::size_t epoch = 0;
  LossBreakdown loss;
  std::vector<double> mean_phi;
};

struct TrainState {
  ModelBundle model;
  /// Parallel to model.parameters().
  std::vector<AdamState> optimizer;
  std::vector<ClusterGmm> cluster_gmms;
  std::vector<CleanGmm2> clean_gmms;
  std::vector<std::vector<double>> clean_scores;
  std::vector<std::vector<double>> phi;
  std::size_t pretrain_epochs_done = 0;
  std::size_t train_epochs_done = 0;
  std::size_t degenerate_fits = 0;
  std::vector<EpochLog> history;

  std::size_t epochs_done() const { return pretrain_epochs_done + train_epochs_done; }
};

/// Freshly initialized networks and optimizer; phi starts at one.
TrainState init_state(const MultiViewDataset& dataset, const TrainConfig& config);

/// Reconstruction-only epochs on encoder and decoder; heads are untouched.
void pretrain(TrainState& state, const MultiViewDataset& dataset, const TrainConfig& config);
TrainState pretrain(const MultiViewDataset& dataset, const TrainConfig& config);

/// Fits each view's classifier head as a nearest-centroid rule on the current
/// latents, using k-means clusters of the first view so labels agree across views.
void init_classifier_heads(TrainState& state, const MultiViewDataset& dataset,
                           const TrainConfig& config);

/// Full-dataset refresh of the cluster GMMs, clean scores and phi. No-op with phi = 1
/// when rectification is ablated.
void e_step(TrainState& state, const MultiViewDataset& dataset, const TrainConfig& config);

/// One pass of minibatch Adam on the weighted objective with frozen phi.
EpochLog m_step_epoch(TrainState& state, const MultiViewDataset& dataset,
                      const TrainConfig& config);

/// Evaluates the objective on `batch` and accumulates gradients into the model.
/// Pass `frozen_targets`/`frozen_selection` to hold the detached pieces fixed
/// across repeated evaluations.
LossBreakdown batch_objective(ModelBundle& model, const MultiViewDataset& dataset,
                              std::span<const std::size_t> batch,
                              const std::vector<std::vector<double>>& phi,
                              const TrainConfig& config,
                              const std::vector<Matrix>* frozen_targets = nullptr,
                              const PairSelection* frozen_selection = nullptr);

/// Full-dataset forward: unit embeddings and soft predictions per view.
struct DatasetForward {
  std::vector<Matrix> z;
  std::vector<Matrix> probs;
};
DatasetForward forward_dataset(const ModelBundle& model, const MultiViewDataset& dataset);

ClusterResult assign_clusters(const TrainState& state, const MultiViewDataset& dataset,
                              bool phi_weighted = false);

struct TrainOptions {
  std::optional<std::filesystem::path> checkpoint_dir;
  std::ostream* log = nullptr;
};

struct TrainOutcome {
  TrainState state;
  ClusterResult result;
  std::optional<MetricsReport> metrics;
};

/// pretrain, head init, then train_epochs rounds of e_step + m_step_epoch.
TrainOutcome train(const MultiViewDataset& dataset, const TrainConfig& config,
                   const TrainOptions& options = {});

/// Tab-separated: epoch, recon, rectify, contrastive, total, selected pairs, mean phi per view.
std::string format_epoch_log(const EpochLog& log);

NamedArrays state_arrays(const TrainState& state);
void write_checkpoint(const TrainState& state, const std::filesystem::path& file);

}  // namespace airmvc
