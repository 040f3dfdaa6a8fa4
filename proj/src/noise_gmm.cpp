#include "airmvc/noise_gmm.hpp"

#include "airmvc/layers.hpp"
#include "airmvc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>

namespace airmvc {

ClusterGmm update_cluster_gmm(const Matrix& z, const Matrix& soft_predictions,
                              const ClusterGmm* previous, std::uint64_t seed) {
  if (z.rows() != soft_predictions.rows()) {
    throw DimensionError("update_cluster_gmm: embeddings " + z.shape_string() +
                         " vs predictions " + soft_predictions.shape_string());
  }
  const std::size_t k_count = soft_predictions.cols();
  const std::size_t dim = z.cols();
  if (previous && (previous->means.rows() != k_count || previous->means.cols() != dim)) {
    throw DimensionError("update_cluster_gmm: previous means " +
                         previous->means.shape_string() + " vs K=" + std::to_string(k_count) +
                         ", d=" + std::to_string(dim));
  }

  // Column sums of y and weighted sums y^T z.
  const std::vector<double> weight = column_sums(soft_predictions);
  const Matrix weighted = matmul_tn(soft_predictions, z);

  ClusterGmm gmm{Matrix(k_count, dim), std::vector<double>(k_count, kSigmaFloor)};
  std::vector<bool> empty(k_count, false);
  auto rng = make_rng({seed, 0x676d6dULL});
  std::normal_distribution<double> normal(0.0, 1.0);

  for (std::size_t k = 0; k < k_count; ++k) {
    auto mu = gmm.means.row(k);
    double norm = 0.0;
    if (weight[k] >= kMinClusterWeight) {
      for (std::size_t d = 0; d < dim; ++d) {
        mu[d] = weighted(k, d) / weight[k];
        norm += mu[d] * mu[d];
      }
      norm = std::sqrt(norm);
    }
    if (weight[k] < kMinClusterWeight || norm < kDegenerateNorm) {
      empty[k] = true;
      if (previous) {
        auto prev = previous->means.row(k);
        std::copy(prev.begin(), prev.end(), mu.begin());
        continue;
      }
      do {
        norm = 0.0;
        for (auto& v : mu) {
          v = normal(rng);
          norm += v * v;
        }
        norm = std::sqrt(norm);
      } while (norm < kDegenerateNorm);
    }
    for (auto& v : mu) v /= norm;
  }

  for (std::size_t k = 0; k < k_count; ++k) {
    if (empty[k]) continue;
    auto mu = gmm.means.row(k);
    double spread = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) {
      auto zi = z.row(i);
      double dist = 0.0;
      for (std::size_t d = 0; d < dim; ++d) dist += (zi[d] - mu[d]) * (zi[d] - mu[d]);
      spread += soft_predictions(i, k) * dist;
    }
    const double sigma = spread / weight[k] / static_cast<double>(dim);
    gmm.variances[k] = std::max(sigma, kSigmaFloor);
  }
  return gmm;
}

Matrix cluster_posterior(const Matrix& z, const ClusterGmm& gmm) {
  if (z.cols() != gmm.means.cols()) {
    throw DimensionError("cluster_posterior: embeddings " + z.shape_string() + " vs means " +
                         gmm.means.shape_string());
  }
  Matrix logits = matmul_nt(z, gmm.means);
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    for (std::size_t k = 0; k < row.size(); ++k) row[k] /= gmm.variances[k];
  }
  return softmax_rows(logits);
}

std::vector<double> clean_score(const Matrix& chi, const Matrix& soft_predictions) {
  require_same_shape(chi, soft_predictions, "clean_score");
  std::vector<double> scores(chi.rows());
  for (std::size_t i = 0; i < chi.rows(); ++i) {
    const std::size_t q = argmax_row(soft_predictions, i);
    scores[i] = std::max(chi(i, q), std::numeric_limits<double>::min());
  }
  return scores;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile: empty input");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

namespace {

double log_normal_density(double x, double mean, double variance) {
  const double diff = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + diff * diff / variance);
}

double log_sum_exp(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

CleanGmm2 fit_two_component_gmm(std::span<const double> scores, int max_iters, double tol) {
  if (scores.size() < 2) {
    throw std::invalid_argument("fit_two_component_gmm: need at least 2 scores");
  }
  CleanGmm2 g;
  const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
  if (*hi_it - *lo_it < 1e-9) {
    g.degenerate = true;
    g.mean[0] = g.mean[1] = *lo_it;
    return g;
  }

  const std::vector<double> values(scores.begin(), scores.end());
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double s : values) mean += s;
  mean /= n;
  double var = 0.0;
  for (double s : values) var += (s - mean) * (s - mean);
  var = std::max(var / n, kCleanVarianceFloor);

  g.mean[0] = percentile(values, 0.1);
  g.mean[1] = percentile(values, 0.9);
  g.variance[0] = g.variance[1] = var;

  std::vector<double> resp1(values.size());
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iters; ++it) {
    // E: responsibilities of component 1 and the log-likelihood at the current parameters.
    double ll = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double a0 = std::log(g.weight[0]) + log_normal_density(values[i], g.mean[0], g.variance[0]);
      const double a1 = std::log(g.weight[1]) + log_normal_density(values[i], g.mean[1], g.variance[1]);
      const double total = log_sum_exp(a0, a1);
      resp1[i] = std::exp(a1 - total);
      ll += total;
    }
    g.log_likelihood = ll;
    g.iterations = it + 1;
    if (std::abs(ll - prev_ll) < tol) break;
    prev_ll = ll;

    // M
    double w1 = 0.0, s1 = 0.0, s0 = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      w1 += resp1[i];
      s1 += resp1[i] * values[i];
      s0 += (1.0 - resp1[i]) * values[i];
    }
    const double w0 = n - w1;
    if (w0 < 1e-12 || w1 < 1e-12) break;
    g.mean[0] = s0 / w0;
    g.mean[1] = s1 / w1;
    double v0 = 0.0, v1 = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      v0 += (1.0 - resp1[i]) * (values[i] - g.mean[0]) * (values[i] - g.mean[0]);
      v1 += resp1[i] * (values[i] - g.mean[1]) * (values[i] - g.mean[1]);
    }
    g.variance[0] = std::max(v0 / w0, kCleanVarianceFloor);
    g.variance[1] = std::max(v1 / w1, kCleanVarianceFloor);
    g.weight[0] = w0 / n;
    g.weight[1] = w1 / n;
  }

  if (g.mean[0] > g.mean[1]) {
    std::swap(g.mean[0], g.mean[1]);
    std::swap(g.variance[0], g.variance[1]);
    std::swap(g.weight[0], g.weight[1]);
  }
  return g;
}

std::vector<double> clean_probability(std::span<const double> scores, const CleanGmm2& gmm2) {
  std::vector<double> phi(scores.size(), 1.0);
  if (gmm2.degenerate) return phi;
  const double lw0 = std::log(gmm2.weight[0]);
  const double lw1 = std::log(gmm2.weight[1]);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double a0 = lw0 + log_normal_density(scores[i], gmm2.mean[0], gmm2.variance[0]);
    const double a1 = lw1 + log_normal_density(scores[i], gmm2.mean[1], gmm2.variance[1]);
    // 1 / (1 + exp(a0 - a1)) without overflow
    const double d = a0 - a1;
    phi[i] = d > 0 ? std::exp(-d) / (1.0 + std::exp(-d)) : 1.0 / (1.0 + std::exp(d));
  }
  return phi;
}

ViewNoiseEstimate estimate_view_noise(const Matrix& z, const Matrix& soft_predictions,
                                      const ClusterGmm* previous, std::uint64_t seed) {
  ViewNoiseEstimate e;
  e.cluster_gmm = update_cluster_gmm(z, soft_predictions, previous, seed);
  const Matrix chi = cluster_posterior(z, e.cluster_gmm);
  e.scores = clean_score(chi, soft_predictions);
  e.clean_gmm = fit_two_component_gmm(e.scores);
  e.phi = clean_probability(e.scores, e.clean_gmm);
  return e;
}

void write_phi_diagnostics(const std::filesystem::path& file, std::span<const double> scores,
                           std::span<const double> phi,
                           const std::optional<std::vector<bool>>& corrupted) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << "sample,clean_score,phi" << (corrupted ? ",corrupted" : "") << '\n';
  char buf[96];
  for (std::size_t i = 0; i < phi.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g", i, scores[i], phi[i]);
    out << buf;
    if (corrupted) out << ',' << ((*corrupted)[i] ? 1 : 0);
    out << '\n';
  }
}

}  // namespace airmvc
