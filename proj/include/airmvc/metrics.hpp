#pragma once

#include "airmvc/matrix.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace airmvc {

struct ClusterResult {
  std::vector<int> assignments;
  Matrix fused_soft;
  std::vector<Matrix> per_view_soft;
};

/// Mean of per-view soft predictions (optionally weighted per sample and view),
/// then row argmax with ties to the lowest index.
ClusterResult fuse_predictions(std::vector<Matrix> per_view_soft,
                               const std::vector<std::vector<double>>* sample_weights = nullptr);

struct Assignment {
  std::vector<std::size_t> column_for_row;
  double cost = 0.0;
};

/// Minimum-cost perfect matching on a square cost matrix (Kuhn-Munkres).
Assignment hungarian(const Matrix& cost);

/// Contingency counts: rows are predicted ids, columns are true ids.
Matrix contingency(std::span<const int> pred, std::span<const int> truth, std::size_t k);

double clustering_accuracy(std::span<const int> pred, std::span<const int> truth, std::size_t k);
double nmi(std::span<const int> pred, std::span<const int> truth);
double purity(std::span<const int> pred, std::span<const int> truth);

/// Enumerates all K! label maps; K must be at most 6.
double brute_force_accuracy(std::span<const int> pred, std::span<const int> truth,
                            std::size_t k);

struct MetricsReport {
  std::string dataset;
  double noise_ratio = 0.0;
  std::uint64_t seed = 0;
  std::string ablation;
  double acc = 0.0;
  double nmi = 0.0;
  double pur = 0.0;
};

MetricsReport evaluate(std::span<const int> pred, std::span<const int> truth, std::size_t k);

inline constexpr const char* kMetricsCsvHeader = "dataset,noise_ratio,seed,ablation,acc,nmi,pur";
std::string to_csv_row(const MetricsReport& report);

}  // namespace airmvc
