#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace hmsq {

struct Kmeans1dResult {
  std::vector<double> centers;      // ascending
  std::vector<int> assignments;     // index into centers, per input point
};

// Deterministic 1-D k-means: centers start at the (i+0.5)/k quantiles of the
// sorted data, then Lloyd iterations until assignments stabilise. Empty
// clusters are reseeded at the point farthest from its center.
Kmeans1dResult kmeans_1d(std::span<const double> data, int k, int max_iters = 100);

struct KmeansResult {
  std::vector<std::vector<double>> centers;
  std::vector<int> assignments;
  double inertia = 0.0;  // sum of squared distances to assigned center
};

// Seeded k-means++ for general vectors (used on state-belief points).
// Empty clusters are reseeded at the current farthest point.
KmeansResult kmeans(const std::vector<std::vector<double>>& data, int k, std::uint64_t seed,
                    int max_iters = 100);

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace hmsq
