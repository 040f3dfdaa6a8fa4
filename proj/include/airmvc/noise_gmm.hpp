#pragma once

#include "airmvc/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace airmvc {

inline constexpr double kSigmaFloor = 1e-4;
/// Clusters whose summed soft weight falls below this keep their previous mean.
inline constexpr double kMinClusterWeight = 1e-8;
inline constexpr double kCleanVarianceFloor = 1e-6;

/// Per-view cluster model on unit embeddings: K unit means and scalar variances.
struct ClusterGmm {
  Matrix means;  // K x d, unit rows
  std::vector<double> variances;

  std::size_t num_clusters() const { return means.rows(); }
};

/// Prediction-weighted means (l2-normalized) and scalar variances
/// (trace of the weighted covariance / d, floored). Empty clusters keep the
/// previous mean, or a random unit vector drawn from `seed` when there is none.
ClusterGmm update_cluster_gmm(const Matrix& z, const Matrix& soft_predictions,
                              const ClusterGmm* previous = nullptr, std::uint64_t seed = 0);

/// chi[i][k] = softmax_k(z_i . mu_k / sigma_k)
Matrix cluster_posterior(const Matrix& z, const ClusterGmm& gmm);

/// chi at each sample's predicted class (argmax of the soft prediction, ties low).
std::vector<double> clean_score(const Matrix& chi, const Matrix& soft_predictions);

/// Two-component 1-D mixture over clean scores; component 1 has the higher mean.
struct CleanGmm2 {
  double mean[2] = {0.0, 0.0};
  double variance[2] = {1.0, 1.0};
  double weight[2] = {0.5, 0.5};
  bool degenerate = false;
  int iterations = 0;
  double log_likelihood = 0.0;
};

CleanGmm2 fit_two_component_gmm(std::span<const double> scores, int max_iters = 100,
                                 double tol = 1e-6);

/// Posterior of the clean component; all ones for a degenerate fit.
std::vector<double> clean_probability(std::span<const double> scores, const CleanGmm2& gmm2);

/// Everything the E-step derives for one view.
struct ViewNoiseEstimate {
  ClusterGmm cluster_gmm;
  std::vector<double> scores;
  CleanGmm2 clean_gmm;
  std::vector<double> phi;
};

ViewNoiseEstimate estimate_view_noise(const Matrix& z, const Matrix& soft_predictions,
                                      const ClusterGmm* previous, std::uint64_t seed);

/// Linear-interpolation percentile, p in [0, 1].
double percentile(std::vector<double> values, double p);

/// CSV: sample,clean_score,phi[,corrupted]
void write_phi_diagnostics(const std::filesystem::path& file, std::span<const double> scores,
                           std::span<const double> phi,
                           const std::optional<std::vector<bool>>& corrupted);

}  // namespace airmvc
