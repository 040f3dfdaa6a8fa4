#include "airmvc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace airmvc {

ClusterResult fuse_predictions(std::vector<Matrix> per_view_soft,
                               const std::vector<std::vector<double>>* sample_weights) {
  if (per_view_soft.empty()) throw std::invalid_argument("fuse_predictions: no views");
  const std::size_t n = per_view_soft.front().rows();
  const std::size_t k = per_view_soft.front().cols();
  for (const auto& y : per_view_soft) require_same_shape(y, per_view_soft.front(), "fuse_predictions");
  if (sample_weights && sample_weights->size() != per_view_soft.size()) {
    throw DimensionError("fuse_predictions: weights for " +
                         std::to_string(sample_weights->size()) + " views, predictions for " +
                         std::to_string(per_view_soft.size()));
  }

  ClusterResult r;
  r.fused_soft = Matrix(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    double total_w = 0.0;
    for (std::size_t v = 0; v < per_view_soft.size(); ++v) {
      const double w = sample_weights ? (*sample_weights)[v][i] : 1.0;
      total_w += w;
      for (std::size_t c = 0; c < k; ++c) r.fused_soft(i, c) += w * per_view_soft[v](i, c);
    }
    if (total_w <= 0.0) {
      // all weights zero: fall back to the plain mean
      total_w = static_cast<double>(per_view_soft.size());
      for (std::size_t c = 0; c < k; ++c) {
        r.fused_soft(i, c) = 0.0;
        for (const auto& y : per_view_soft) r.fused_soft(i, c) += y(i, c);
      }
    }
    for (std::size_t c = 0; c < k; ++c) r.fused_soft(i, c) /= total_w;
  }
  r.assignments.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    r.assignments[i] = static_cast<int>(argmax_row(r.fused_soft, i));
  r.per_view_soft = std::move(per_view_soft);
  return r;
}

Assignment hungarian(const Matrix& cost) {
  if (cost.rows() != cost.cols()) {
    throw DimensionError("hungarian: cost matrix must be square, got " + cost.shape_string());
  }
  if (!all_finite(cost)) throw std::invalid_argument("hungarian: non-finite cost");
  const std::size_t n = cost.rows();
  Assignment out;
  out.column_for_row.assign(n, 0);
  if (n == 0) return out;

  // Potentials u (rows), v (columns); p[j] is the row matched to column j (1-based, 0 = free).
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  for (std::size_t j = 1; j <= n; ++j) out.column_for_row[p[j] - 1] = j - 1;
  for (std::size_t i = 0; i < n; ++i) out.cost += cost(i, out.column_for_row[i]);
  return out;
}

namespace {

void require_equal_length(std::span<const int> pred, std::span<const int> truth, const char* op) {
  if (pred.size() != truth.size()) {
    throw std::invalid_argument(std::string(op) + ": " + std::to_string(pred.size()) +
                                " predictions vs " + std::to_string(truth.size()) + " labels");
  }
}

std::map<int, std::size_t> dense_ids(std::span<const int> labels) {
  std::map<int, std::size_t> ids;
  for (int l : labels) ids.emplace(l, 0);
  std::size_t next = 0;
  for (auto& [label, id] : ids) id = next++;
  return ids;
}

double entropy(const std::vector<double>& counts, double n) {
  double h = 0.0;
  for (double c : counts)
    if (c > 0) h -= (c / n) * std::log(c / n);
  return h;
}

}  // namespace

Matrix contingency(std::span<const int> pred, std::span<const int> truth, std::size_t k) {
  require_equal_length(pred, truth, "contingency");
  Matrix table(k, k);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || truth[i] < 0 || static_cast<std::size_t>(pred[i]) >= k ||
        static_cast<std::size_t>(truth[i]) >= k) {
      throw std::invalid_argument("contingency: label outside [0, " + std::to_string(k) +
                                  ") at index " + std::to_string(i));
    }
    table(static_cast<std::size_t>(pred[i]), static_cast<std::size_t>(truth[i])) += 1.0;
  }
  return table;
}

double clustering_accuracy(std::span<const int> pred, std::span<const int> truth, std::size_t k) {
  require_equal_length(pred, truth, "clustering_accuracy");
  if (pred.empty()) return 0.0;
  Matrix cost = contingency(pred, truth, k);
  cost *= -1.0;
  const Assignment a = hungarian(cost);
  return -a.cost / static_cast<double>(pred.size());
}

double nmi(std::span<const int> pred, std::span<const int> truth) {
  require_equal_length(pred, truth, "nmi");
  if (pred.empty()) return 0.0;
  const auto pid = dense_ids(pred);
  const auto tid = dense_ids(truth);
  const double n = static_cast<double>(pred.size());

  Matrix joint(pid.size(), tid.size());
  for (std::size_t i = 0; i < pred.size(); ++i) joint(pid.at(pred[i]), tid.at(truth[i])) += 1.0;
  std::vector<double> rows(pid.size(), 0.0), cols(tid.size(), 0.0);
  for (std::size_t r = 0; r < joint.rows(); ++r)
    for (std::size_t c = 0; c < joint.cols(); ++c) {
      rows[r] += joint(r, c);
      cols[c] += joint(r, c);
    }
  const double hp = entropy(rows, n);
  const double ht = entropy(cols, n);
  if (hp + ht == 0.0) return 1.0;  // both partitions are a single cluster

  double mi = 0.0;
  for (std::size_t r = 0; r < joint.rows(); ++r)
    for (std::size_t c = 0; c < joint.cols(); ++c) {
      const double nij = joint(r, c);
      if (nij > 0) mi += (nij / n) * std::log(nij * n / (rows[r] * cols[c]));
    }
  return std::clamp(mi / (0.5 * (hp + ht)), 0.0, 1.0);
}

double purity(std::span<const int> pred, std::span<const int> truth) {
  require_equal_length(pred, truth, "purity");
  if (pred.empty()) return 0.0;
  std::map<int, std::map<int, std::size_t>> clusters;
  for (std::size_t i = 0; i < pred.size(); ++i) ++clusters[pred[i]][truth[i]];
  std::size_t total = 0;
  for (const auto& [id, counts] : clusters) {
    std::size_t best = 0;
    for (const auto& [label, c] : counts) best = std::max(best, c);
    total += best;
  }
  return static_cast<double>(total) / static_cast<double>(pred.size());
}

double brute_force_accuracy(std::span<const int> pred, std::span<const int> truth,
                            std::size_t k) {
  if (k > 6) throw std::invalid_argument("brute_force_accuracy: K must be at most 6");
  require_equal_length(pred, truth, "brute_force_accuracy");
  if (pred.empty()) return 0.0;
  const Matrix table = contingency(pred, truth, k);
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    double hits = 0.0;
    for (std::size_t c = 0; c < k; ++c) hits += table(c, perm[c]);
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(pred.size());
}

MetricsReport evaluate(std::span<const int> pred, std::span<const int> truth, std::size_t k) {
  MetricsReport r;
  r.acc = clustering_accuracy(pred, truth, k);
  r.nmi = nmi(pred, truth);
  r.pur = purity(pred, truth);
  return r;
}

std::string to_csv_row(const MetricsReport& report) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%.17g,%llu,%s,%.17g,%.17g,%.17g", report.dataset.c_str(),
                report.noise_ratio, static_cast<unsigned long long>(report.seed),
                report.ablation.c_str(), report.acc, report.nmi, report.pur);
  return buf;
}

}  // namespace airmvc
