#include "hmsq/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "hmsq/kmeans.hpp"
#include "hmsq/rng.hpp"

namespace hmsq {

namespace {

constexpr double kEmptyCellMass = 1e-12;

void check_components(const std::vector<GaussComponent>& components) {
  if (components.empty()) throw std::invalid_argument("MixturePdf: no components");
  for (const auto& c : components) {
    if (!(c.weight >= 0.0) || !std::isfinite(c.weight))
      throw std::invalid_argument("MixturePdf: bad component weight");
    if (!(c.var > 0.0)) throw std::invalid_argument("MixturePdf: variance must be positive");
    if (!std::isfinite(c.mean)) throw std::invalid_argument("MixturePdf: non-finite mean");
  }
}

}  // namespace

MixturePdf::MixturePdf(std::vector<GaussComponent> components, Interval support, double norm)
    : components_(std::move(components)), support_(support), norm_(norm) {}

MixturePdf MixturePdf::full(std::vector<GaussComponent> components) {
  check_components(components);
  double total = 0.0;
  for (const auto& c : components) total += c.weight;
  if (!(total > 0.0)) throw std::invalid_argument("MixturePdf: zero total weight");
  return MixturePdf(std::move(components), Interval{-kInf, kInf}, total);
}

MixturePdf MixturePdf::truncated(std::vector<GaussComponent> components, double lo, double hi) {
  check_components(components);
  if (!(lo < hi)) throw std::invalid_argument("MixturePdf: empty support");
  double retained = 0.0;
  for (const auto& c : components) retained += c.weight * gauss_interval_mass(c.mean, c.var, lo, hi);
  if (!(retained > 0.0))
    throw std::invalid_argument("MixturePdf: no probability mass on the support");
  return MixturePdf(std::move(components), Interval{lo, hi}, retained);
}

MixturePdf MixturePdf::truncated_per_component(std::vector<GaussComponent> components, double lo,
                                               double hi) {
  check_components(components);
  if (!(lo < hi)) throw std::invalid_argument("MixturePdf: empty support");
  double total = 0.0;
  for (auto& c : components) {
    const double m = gauss_interval_mass(c.mean, c.var, lo, hi);
    // The floor also keeps weight / m from overflowing on subnormal masses.
    if (!(m > 1e-300)) {
      // A component entirely outside the cut contributes nothing; dropping it
      // (weight 0) keeps the remaining weights' proportions.
      c.weight = 0.0;
      continue;
    }
    c.weight /= m;
    total += c.weight * m;  // == original weight
  }
  if (!(total > 0.0))
    throw std::invalid_argument("MixturePdf: no probability mass on the support");
  return MixturePdf(std::move(components), Interval{lo, hi}, total);
}

double MixturePdf::pdf(double x) const {
  if (!support_.contains(x)) return 0.0;
  double acc = 0.0;
  for (const auto& c : components_) {
    const double sd = std::sqrt(c.var);
    acc += c.weight * norm_pdf((x - c.mean) / sd) / sd;
  }
  return acc / norm_;
}

PartialMoments MixturePdf::partial_moments(double lo, double hi) const {
  const double a = std::max(lo, support_.lo);
  const double b = std::min(hi, support_.hi);
  PartialMoments out{0.0, 0.0, 0.0};
  if (!(a < b)) return out;
  for (const auto& c : components_) {
    if (c.weight <= 0.0) continue;
    const PartialMoments pm = gauss_partial_moments(c.mean, c.var, a, b);
    out.m0 += c.weight * pm.m0;
    out.m1 += c.weight * pm.m1;
    out.m2 += c.weight * pm.m2;
  }
  out.m0 /= norm_;
  out.m1 /= norm_;
  out.m2 /= norm_;
  return out;
}

double MixturePdf::mass(double lo, double hi) const { return partial_moments(lo, hi).m0; }

double MixturePdf::mean() const { return partial_moments(support_.lo, support_.hi).m1; }

double MixturePdf::variance() const {
  const PartialMoments pm = partial_moments(support_.lo, support_.hi);
  return pm.m2 - pm.m1 * pm.m1;
}

double MixturePdf::quantile(double q) const {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("MixturePdf::quantile: q outside (0,1)");
  double lo = support_.lo;
  double hi = support_.hi;
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    // Bracket from the component envelope, then widen until the target mass
    // is enclosed.
    double a = kInf, b = -kInf;
    for (const auto& c : components_) {
      if (c.weight <= 0.0) continue;
      const double s = std::sqrt(c.var);
      a = std::min(a, c.mean - 10.0 * s);
      b = std::max(b, c.mean + 10.0 * s);
    }
    if (!std::isfinite(lo)) lo = a;
    if (!std::isfinite(hi)) hi = b;
    while (mass(support_.lo, lo) > q) lo -= (b - a);
    while (mass(support_.lo, hi) < q) hi += (b - a);
  }
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (mass(support_.lo, mid) < q)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<PartialMoments> cell_moments(const MixturePdf& pdf,
                                         std::span<const double> thresholds) {
  const std::size_t cells = thresholds.size() + 1;
  std::vector<PartialMoments> out(cells, PartialMoments{0.0, 0.0, 0.0});
  const Interval& support = pdf.support();

  // Per-boundary primitives cached per component: z, Phi(z), Q(z), phi(z),
  // z*phi(z) (the last three vanish at infinite boundaries).
  const std::size_t nb = cells + 1;
  std::vector<double> z(nb), cdf(nb), sf(nb), phi(nb), zphi(nb);
  for (const auto& c : pdf.components()) {
    if (c.weight <= 0.0) continue;
    const double sd = std::sqrt(c.var);
    for (std::size_t b = 0; b < nb; ++b) {
      const double x = b == 0 ? support.lo : (b == nb - 1 ? support.hi : thresholds[b - 1]);
      if (x == -kInf) {
        z[b] = -kInf; cdf[b] = 0.0; sf[b] = 1.0; phi[b] = 0.0; zphi[b] = 0.0;
      } else if (x == kInf) {
        z[b] = kInf; cdf[b] = 1.0; sf[b] = 0.0; phi[b] = 0.0; zphi[b] = 0.0;
      } else {
        z[b] = (x - c.mean) / sd;
        cdf[b] = norm_cdf(z[b]);
        sf[b] = norm_sf(z[b]);
        phi[b] = norm_pdf(z[b]);
        zphi[b] = z[b] * phi[b];
      }
    }
    for (std::size_t i = 0; i < cells; ++i) {
      const std::size_t lo = i, hi = i + 1;
      // Tail-stable mass: survival-function difference in the right tail,
      // CDF difference in the left, split form when straddling the mean.
      double m0;
      if (z[lo] >= 0.0)
        m0 = sf[lo] - sf[hi];
      else if (z[hi] <= 0.0)
        m0 = cdf[hi] - cdf[lo];
      else
        m0 = 1.0 - cdf[lo] - sf[hi];
      m0 = std::max(m0, 0.0);
      const double dphi = phi[lo] - phi[hi];
      const double m1 = c.mean * m0 + sd * dphi;
      const double m2 =
          c.mean * c.mean * m0 + 2.0 * c.mean * sd * dphi + c.var * (m0 + zphi[lo] - zphi[hi]);
      out[i].m0 += c.weight * m0;
      out[i].m1 += c.weight * m1;
      out[i].m2 += c.weight * m2;
    }
  }
  // The whole-support mass of the weighted components is exactly the pdf's
  // normalizer, so dividing by the summed m0 normalizes identically.
  double total = 0.0;
  for (const auto& pm : out) total += pm.m0;
  if (total > 0.0) {
    for (auto& pm : out) {
      pm.m0 /= total;
      pm.m1 /= total;
      pm.m2 /= total;
    }
  }
  return out;
}

int Codebook::quantize(double x) const {
  // A point exactly on a boundary belongs to the lower cell; encoder and
  // decoder must agree on this.
  const auto it = std::lower_bound(thresholds.begin(), thresholds.end(), x);
  return static_cast<int>(it - thresholds.begin());
}

double Codebook::dequantize(int index) const {
  if (index < 0 || index >= size()) throw std::out_of_range("Codebook: index out of range");
  return reps[index];
}

Interval Codebook::cell_interval(int index) const {
  if (index < 0 || index >= size()) throw std::out_of_range("Codebook: index out of range");
  Interval cell;
  cell.lo = index == 0 ? -kInf : thresholds[index - 1];
  cell.hi = index == size() - 1 ? kInf : thresholds[index];
  return cell;
}

void Codebook::validate() const {
  if (reps.empty()) throw std::invalid_argument("Codebook: no reproduction levels");
  if (thresholds.size() + 1 != reps.size())
    throw std::invalid_argument("Codebook: threshold count must be reps - 1");
  for (std::size_t i = 0; i + 1 < reps.size(); ++i) {
    if (!(reps[i] < reps[i + 1]))
      throw std::invalid_argument("Codebook: reproduction levels must be strictly ascending");
    if (!(reps[i] <= thresholds[i] && thresholds[i] <= reps[i + 1]))
      throw std::invalid_argument("Codebook: threshold outside its rep bracket");
    if (i > 0 && !(thresholds[i - 1] < thresholds[i]))
      throw std::invalid_argument("Codebook: thresholds must be strictly ascending");
  }
  for (double r : reps)
    if (!std::isfinite(r)) throw std::invalid_argument("Codebook: non-finite level");
}

namespace {

void midpoint_thresholds(Codebook& cb) {
  const int k = cb.size();
  cb.thresholds.resize(k - 1);
  for (int i = 0; i + 1 < k; ++i) cb.thresholds[i] = 0.5 * (cb.reps[i] + cb.reps[i + 1]);
}

// Enforce strictly ascending reps by nudging duplicates upward.
void make_strictly_ascending(std::vector<double>& reps) {
  std::sort(reps.begin(), reps.end());
  for (std::size_t i = 1; i < reps.size(); ++i) {
    const double min_step = std::max(1e-12, std::abs(reps[i - 1]) * 1e-12);
    if (reps[i] <= reps[i - 1]) reps[i] = reps[i - 1] + min_step;
  }
}

// Centroid update with repair: cells that lost (almost) all probability mass
// steal a rep position inside the currently heaviest cell.
void centroid_update(const MixturePdf& pdf, Codebook& cb) {
  const int k = cb.size();
  const std::vector<PartialMoments> pm = cell_moments(pdf, cb.thresholds);

  std::vector<double> reps(k);
  bool repaired = false;
  for (int i = 0; i < k; ++i) {
    if (pm[i].m0 >= kEmptyCellMass) {
      reps[i] = pm[i].m1 / pm[i].m0;
      continue;
    }
    repaired = true;
    int heavy = 0;
    for (int j = 1; j < k; ++j)
      if (pm[j].m0 > pm[heavy].m0) heavy = j;
    const Interval cell = cb.cell_interval(heavy);
    const double centroid = pm[heavy].m1 / pm[heavy].m0;
    double width = cell.width();
    if (!std::isfinite(width)) width = 2.0 * std::sqrt(std::max(pdf.variance(), 1e-12));
    // Land on the emptier side of the heavy cell's centroid.
    reps[i] = (i < heavy) ? centroid - 0.25 * width : centroid + 0.25 * width;
  }
  if (repaired) make_strictly_ascending(reps);
  cb.reps = std::move(reps);
  midpoint_thresholds(cb);
}

}  // namespace

Codebook lloyd_iterate(const MixturePdf& pdf, Codebook cb, int iters) {
  if (cb.reps.empty()) throw std::invalid_argument("lloyd_iterate: empty codebook");
  if (cb.size() == 1) {
    cb.reps[0] = pdf.mean();
    cb.thresholds.clear();
    return cb;
  }
  for (int it = 0; it < iters; ++it) {
    midpoint_thresholds(cb);
    centroid_update(pdf, cb);
  }
  return cb;
}

double expected_distortion(const MixturePdf& pdf, const Codebook& cb) {
  const std::vector<PartialMoments> pm = cell_moments(pdf, cb.thresholds);
  double d = 0.0;
  for (int i = 0; i < cb.size(); ++i) {
    const double r = cb.reps[i];
    d += pm[i].m2 - 2.0 * r * pm[i].m1 + r * r * pm[i].m0;
  }
  return std::max(d, 0.0);
}

Codebook lloyd_converge(const MixturePdf& pdf, Codebook cb, int max_iters, double tol) {
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iters; ++it) {
    cb = lloyd_iterate(pdf, std::move(cb), 1);
    const double d = expected_distortion(pdf, cb);
    // prev is infinite on the first pass; comparing against it would read as
    // instant convergence.
    if (std::isfinite(prev) && prev - d <= tol * std::max(prev, 1e-30)) break;
    prev = d;
  }
  return cb;
}

Codebook lloyd_design(const MixturePdf& pdf, int k, const LloydOptions& opts) {
  if (k < 1) throw std::invalid_argument("lloyd_design: k must be positive");
  if (k == 1) {
    Codebook cb;
    cb.reps = {pdf.mean()};
    return cb;
  }

  Codebook best;
  double best_d = std::numeric_limits<double>::infinity();
  for (int attempt = 0; attempt <= opts.restarts; ++attempt) {
    Codebook cb;
    cb.reps.resize(k);
    if (attempt == 0) {
      for (int i = 0; i < k; ++i) cb.reps[i] = pdf.quantile((i + 0.5) / k);
    } else {
      Rng rng(Rng::mix(opts.seed, 0x6c6c6f79 + attempt));
      for (int i = 0; i < k; ++i) cb.reps[i] = pdf.quantile(rng.uniform(0.001, 0.999));
    }
    make_strictly_ascending(cb.reps);
    midpoint_thresholds(cb);
    cb = lloyd_converge(pdf, std::move(cb), opts.max_iters, opts.tol);
    const double d = expected_distortion(pdf, cb);
    if (d < best_d) {
      best_d = d;
      best = std::move(cb);
    }
  }
  best.validate();
  return best;
}

Codebook lloyd_design_samples(std::span<const double> samples, int k, int max_iters) {
  if (k < 1) throw std::invalid_argument("lloyd_design_samples: k must be positive");
  if (samples.empty()) throw std::invalid_argument("lloyd_design_samples: empty sample");
  if (k == 1) {
    double mean = 0.0;
    for (double x : samples) mean += x;
    Codebook cb;
    cb.reps = {mean / samples.size()};
    return cb;
  }
  const Kmeans1dResult km = kmeans_1d(samples, k, max_iters);
  Codebook cb;
  cb.reps = km.centers;
  make_strictly_ascending(cb.reps);
  midpoint_thresholds(cb);
  cb.validate();
  return cb;
}

Codebook uniform_codebook(int k, double lo, double hi) {
  if (k < 1) throw std::invalid_argument("uniform_codebook: k must be positive");
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw std::invalid_argument("uniform_codebook: need a finite non-empty range");
  const double w = (hi - lo) / k;
  Codebook cb;
  cb.reps.resize(k);
  for (int i = 0; i < k; ++i) cb.reps[i] = lo + (i + 0.5) * w;
  if (k > 1) {
    cb.thresholds.resize(k - 1);
    for (int i = 0; i + 1 < k; ++i) cb.thresholds[i] = lo + (i + 1) * w;
  }
  return cb;
}

}  // namespace hmsq
