#pragma once

#include "airmvc/matrix.hpp"

#include <cstdint>
#include <vector>

namespace airmvc {

struct KMeansResult {
  Matrix centroids;
  std::vector<int> labels;
  double inertia = 0.0;
};

/// Lloyd iterations from k-means++ seeding; best of `restarts` by inertia.
KMeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, int max_iters = 100,
                    int restarts = 4);

}  // namespace airmvc
