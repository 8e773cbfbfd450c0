#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hmsq/gauss.hpp"

namespace hmsq {

struct Interval {
  double lo = -kInf;
  double hi = kInf;

  bool contains(double x) const { return x >= lo && x <= hi; }
  double width() const { return hi - lo; }
};

struct GaussComponent {
  double weight = 1.0;
  double mean = 0.0;
  double var = 1.0;
};

// Gaussian mixture restricted to an interval. pdf(x) = sum_j w_j N(x; mu_j,
// var_j) / Z on the support and 0 outside; Z makes the density integrate to 1.
// All moment queries are closed-form (no sampling).
class MixturePdf {
 public:
  // Untruncated mixture; weights are normalized internally.
  static MixturePdf full(std::vector<GaussComponent> components);
  // Restriction of the whole mixture to [lo, hi]: components keep their
  // relative weights, the shared normalizer shrinks to the retained mass.
  static MixturePdf truncated(std::vector<GaussComponent> components, double lo, double hi);
  // Each component is renormalized on [lo, hi] before mixing, so component j
  // still contributes weight w_j of the total mass however little of its
  // Gaussian survives the cut.
  static MixturePdf truncated_per_component(std::vector<GaussComponent> components, double lo,
                                            double hi);

  double pdf(double x) const;
  // Probability of [lo, hi] under the normalized density.
  double mass(double lo, double hi) const;
  // Restricted moments of the normalized density: m0 = P[cell],
  // m1 = E[x 1(cell)], m2 = E[x^2 1(cell)].
  PartialMoments partial_moments(double lo, double hi) const;
  double mean() const;
  double variance() const;
  // Inverse CDF by bisection; q in (0, 1).
  double quantile(double q) const;

  const Interval& support() const { return support_; }
  const std::vector<GaussComponent>& components() const { return components_; }

 private:
  MixturePdf(std::vector<GaussComponent> components, Interval support, double norm);

  std::vector<GaussComponent> components_;
  Interval support_;
  double norm_ = 1.0;  // Z above; pdf and moments divide by it
};

// Scalar quantizer: strictly ascending reproduction levels and the K-1
// interior cell boundaries between them.
struct Codebook {
  std::vector<double> reps;
  std::vector<double> thresholds;

  int size() const { return static_cast<int>(reps.size()); }
  int quantize(double x) const;
  double dequantize(int index) const;
  Interval cell_interval(int index) const;
  // Throws std::invalid_argument when ordering or interleaving is broken.
  void validate() const;
};

struct LloydOptions {
  int max_iters = 200;
  double tol = 1e-10;     // relative distortion improvement stop
  int restarts = 0;       // extra seeded random inits beyond the quantile init
  std::uint64_t seed = 0;
};

// Lloyd-Max design against a closed-form density. The first init places reps
// at mixture quantiles; additional restarts draw reps from the mixture.
Codebook lloyd_design(const MixturePdf& pdf, int k, const LloydOptions& opts = {});

// Fixed number of threshold/centroid passes starting from an existing
// codebook (with empty-cell repair); the workhorse of per-sample adaptation.
Codebook lloyd_iterate(const MixturePdf& pdf, Codebook cb, int iters);

// Passes from an existing codebook until the relative distortion improvement
// drops below tol (or max_iters).
Codebook lloyd_converge(const MixturePdf& pdf, Codebook cb, int max_iters = 100,
                        double tol = 1e-10);

// Lloyd on an empirical sample (deterministic quantile init).
Codebook lloyd_design_samples(std::span<const double> samples, int k, int max_iters = 100);

// k cells of equal width spanning [lo, hi], reps at cell midpoints.
Codebook uniform_codebook(int k, double lo, double hi);

double expected_distortion(const MixturePdf& pdf, const Codebook& cb);

// Restricted moments of every cell induced by ascending interior thresholds
// over the pdf's support (thresholds.size() + 1 cells). Equivalent to calling
// partial_moments per cell but evaluates each boundary only once.
std::vector<PartialMoments> cell_moments(const MixturePdf& pdf,
                                         std::span<const double> thresholds);

}  // namespace hmsq
