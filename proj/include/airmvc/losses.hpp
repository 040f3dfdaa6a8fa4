#pragma once

#include "airmvc/matrix.hpp"

#include <span>
#include <vector>

namespace airmvc {

struct LossBreakdown {
  double recon = 0.0;
  double rectify = 0.0;
  double contrastive = 0.0;
  double total = 0.0;
  std::size_t selected_pair_count = 0;
};

/// A loss value with its gradient w.r.t. each input matrix.
struct LossWithGrads {
  double value = 0.0;
  std::vector<Matrix> grads;
};

inline constexpr double kLogClamp = 1e-12;
inline constexpr double kDefaultSimilarityClamp = 1e-6;

/// m_i = phi_i * y_v_i + (1 - phi_i) * y_first_i
Matrix mix_predictions(const Matrix& y_view, const Matrix& y_first, std::span<const double> phi);

/// Mean over views 2..V of the per-sample cross-entropy -sum_j m_ij log y_ij.
/// Targets are constants; gradients are w.r.t. the predictions only.
LossWithGrads rectification_loss(std::span<const Matrix> targets,
                                 std::span<const Matrix> predictions);

/// Dot product of unit vectors clamped to [-1, 1].
double pair_similarity(std::span<const double> a, std::span<const double> b);

/// Thresholded cross-view pair gates. masks[m * V + n] is a B x B 0/1 matrix
/// with entry (i, j) set when y_i^m . y_j^n >= tau (diagonal view blocks stay empty).
struct PairSelection {
  std::size_t num_views = 0;
  std::size_t batch = 0;
  std::vector<Matrix> masks;
  std::size_t count = 0;

  const Matrix& mask(std::size_t m, std::size_t n) const { return masks[m * num_views + n]; }
};

PairSelection select_pairs(std::span<const Matrix> predictions, double tau);

struct ContrastiveResult {
  double value = 0.0;
  std::size_t selected_pair_count = 0;
  std::vector<Matrix> grads;  // w.r.t. each view's unit embeddings
};

/// Sum over selected (m, n, i, j) of log(1 - s(z_i^m, z_j^n)) + log(1 - s(z_j^m, z_i^n)),
/// with s clamped to at most 1 - similarity_clamp, divided by V(V-1) and by the
/// number of selected pairs. Zero when nothing is selected.
ContrastiveResult contrastive_loss(std::span<const Matrix> z, const PairSelection& selection,
                                   double similarity_clamp = kDefaultSimilarityClamp);

ContrastiveResult contrastive_loss(std::span<const Matrix> z,
                                   std::span<const Matrix> predictions, double tau,
                                   double similarity_clamp = kDefaultSimilarityClamp);

/// Sum over views of the per-sample mean squared reconstruction error.
LossWithGrads reconstruction_loss(std::span<const Matrix> x, std::span<const Matrix> x_hat);

LossBreakdown total_loss(double recon, double rectify, double contrastive, double alpha,
                         double beta, std::size_t selected_pair_count = 0);

}  // namespace airmvc
