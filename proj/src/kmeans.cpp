#include "airmvc/kmeans.hpp"

#include "airmvc/rng.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace airmvc {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

KMeansResult lloyd(const Matrix& x, std::size_t k, std::mt19937_64& rng, int max_iters) {
  const std::size_t n = x.rows();
  KMeansResult r{Matrix(k, x.cols()), std::vector<int>(n, -1), 0.0};

  // k-means++ seeding
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t chosen = pick(rng);
  for (std::size_t c = 0; c < k; ++c) {
    auto src = x.row(chosen);
    std::copy(src.begin(), src.end(), r.centroids.row(c).begin());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], sq_dist(x.row(i), r.centroids.row(c)));
      total += nearest[i];
    }
    if (c + 1 == k) break;
    if (total <= 0.0) {
      chosen = pick(rng);
      continue;
    }
    std::uniform_real_distribution<double> u(0.0, total);
    double target = u(rng);
    chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      target -= nearest[i];
      if (target <= 0.0) {
        chosen = i;
        break;
      }
    }
  }

  for (int it = 0; it < max_iters; ++it) {
    bool changed = false;
    r.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = sq_dist(x.row(i), r.centroids.row(c));
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(c);
        }
      }
      if (r.labels[i] != best) changed = true;
      r.labels[i] = best;
      r.inertia += best_d;
    }
    if (!changed && it > 0) break;

    Matrix sums(k, x.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(r.labels[i]);
      ++counts[c];
      auto dst = sums.row(c);
      auto src = x.row(i);
      for (std::size_t d = 0; d < src.size(); ++d) dst[d] += src[d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // keep the old centroid
      auto dst = r.centroids.row(c);
      auto src = sums.row(c);
      for (std::size_t d = 0; d < src.size(); ++d) dst[d] = src[d] / static_cast<double>(counts[c]);
    }
  }
  return r;
}

}  // namespace

KMeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, int max_iters,
                    int restarts) {
  if (k == 0 || x.rows() < k) {
    throw std::invalid_argument("kmeans: need at least k=" + std::to_string(k) + " rows, got " +
                                std::to_string(x.rows()));
  }
  auto rng = make_rng({seed, 0x6b6d65616e73ULL});
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(restarts, 1); ++r) {
    KMeansResult cur = lloyd(x, k, rng, max_iters);
    if (cur.inertia < best.inertia) best = std::move(cur);
  }
  return best;
}

}  // namespace airmvc
