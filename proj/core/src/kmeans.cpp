#include "hmsq/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "hmsq/rng.hpp"

namespace hmsq {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("squared_distance: size mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    d += diff * diff;
  }
  return d;
}

Kmeans1dResult kmeans_1d(std::span<const double> data, int k, int max_iters) {
  if (k < 1) throw std::invalid_argument("kmeans_1d: k must be positive");
  if (data.empty()) throw std::invalid_argument("kmeans_1d: empty data");
  const std::size_t n = data.size();

  std::vector<double> sorted(data.begin(), data.end());
  std::sort(sorted.begin(), sorted.end());

  std::vector<double> centers(k);
  for (int i = 0; i < k; ++i) {
    const double q = (i + 0.5) / k;
    const double pos = q * (n - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = pos - lo;
    centers[i] = sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
  }

  std::vector<int> assign(n, 0);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (std::size_t t = 0; t < n; ++t) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int i = 0; i < k; ++i) {
        const double d = std::abs(data[t] - centers[i]);
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      if (assign[t] != best) {
        assign[t] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;

    std::vector<double> sum(k, 0.0);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t t = 0; t < n; ++t) {
      sum[assign[t]] += data[t];
      ++count[assign[t]];
    }
    for (int i = 0; i < k; ++i) {
      if (count[i] > 0) {
        centers[i] = sum[i] / count[i];
      } else {
        // Reseed an empty cluster at the point farthest from its own center.
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t t = 0; t < n; ++t) {
          const double d = std::abs(data[t] - centers[assign[t]]);
          if (d > far_d) {
            far_d = d;
            far = t;
          }
        }
        centers[i] = data[far];
      }
    }
  }

  // Report centers in ascending order with assignments remapped to match.
  std::vector<int> order(k);
  for (int i = 0; i < k; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return centers[a] < centers[b]; });
  std::vector<int> rank(k);
  for (int i = 0; i < k; ++i) rank[order[i]] = i;

  Kmeans1dResult out;
  out.centers.resize(k);
  for (int i = 0; i < k; ++i) out.centers[i] = centers[order[i]];
  out.assignments.resize(n);
  for (std::size_t t = 0; t < n; ++t) out.assignments[t] = rank[assign[t]];
  return out;
}

namespace {

int nearest_center(const std::vector<std::vector<double>>& centers,
                   std::span<const double> point) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const double d = squared_distance(centers[i], point);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace

KmeansResult kmeans(const std::vector<std::vector<double>>& data, int k, std::uint64_t seed,
                    int max_iters) {
  if (k < 1) throw std::invalid_argument("kmeans: k must be positive");
  if (data.empty()) throw std::invalid_argument("kmeans: empty data");
  const std::size_t n = data.size();
  const std::size_t dim = data[0].size();
  for (const auto& p : data)
    if (p.size() != dim) throw std::invalid_argument("kmeans: ragged data");

  Rng rng(seed);
  std::vector<std::vector<double>> centers;
  centers.reserve(k);

  // k-means++ seeding: first center uniform, rest proportional to squared
  // distance from the nearest chosen center.
  centers.push_back(data[rng.index(n)]);
  std::vector<double> dist2(n);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, squared_distance(c, data[t]));
      dist2[t] = best;
      total += best;
    }
    if (total <= 0.0) {
      // All points coincide with existing centers; duplicate one of them.
      centers.push_back(data[rng.index(n)]);
      continue;
    }
    centers.push_back(data[rng.categorical(dist2)]);
  }

  std::vector<int> assign(n, -1);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (std::size_t t = 0; t < n; ++t) {
      const int best = nearest_center(centers, data[t]);
      if (assign[t] != best) {
        assign[t] = best;
        changed = true;
      }
    }
    if (!changed) break;

    std::vector<std::vector<double>> sum(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> count(k, 0);
    for (std::size_t t = 0; t < n; ++t) {
      for (std::size_t d = 0; d < dim; ++d) sum[assign[t]][d] += data[t][d];
      ++count[assign[t]];
    }
    for (int i = 0; i < k; ++i) {
      if (count[i] > 0) {
        for (std::size_t d = 0; d < dim; ++d) centers[i][d] = sum[i][d] / count[i];
      } else {
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t t = 0; t < n; ++t) {
          const double d = squared_distance(centers[assign[t]], data[t]);
          if (d > far_d) {
            far_d = d;
            far = t;
          }
        }
        centers[i] = data[far];
      }
    }
  }

  KmeansResult out;
  out.centers = std::move(centers);
  out.assignments.resize(n);
  out.inertia = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const int best = nearest_center(out.centers, data[t]);
    out.assignments[t] = best;
    out.inertia += squared_distance(out.centers[best], data[t]);
  }
  return out;
}

}  // namespace hmsq
