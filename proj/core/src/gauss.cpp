#include "hmsq/gauss.hpp"

#include <cmath>
#include <stdexcept>

namespace hmsq {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;
}  // namespace

double norm_pdf(double z) {
  if (std::isinf(z)) return 0.0;
  return kInvSqrt2Pi * std::exp(-0.5 * z * z);
}

double norm_logpdf(double z) { return -0.5 * z * z - kLogSqrt2Pi; }

double norm_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

double norm_sf(double z) { return 0.5 * std::erfc(z * kInvSqrt2); }

double gauss_logpdf(double x, double mean, double var) {
  const double z = (x - mean) * (x - mean) / var;
  return -0.5 * (z + std::log(var)) - kLogSqrt2Pi;
}

// Mass of the standard normal on (a, b), a <= b. When the interval sits
// entirely in one tail the subtraction is done between survival functions of
// the same sign, so no relative precision is lost to cancellation.
static double std_interval_mass(double a, double b) {
  if (!(a <= b)) return 0.0;
  if (a >= 0.0) return norm_sf(a) - norm_sf(b);
  if (b <= 0.0) return norm_cdf(b) - norm_cdf(a);
  return norm_cdf(b) - norm_cdf(a);
}

double gauss_interval_mass(double mean, double var, double lo, double hi) {
  if (!(var > 0.0)) throw std::invalid_argument("gauss_interval_mass: variance must be positive");
  if (!(lo <= hi)) return 0.0;
  const double sd = std::sqrt(var);
  const double a = (lo - mean) / sd;
  const double b = (hi - mean) / sd;
  double m = std_interval_mass(a, b);
  if (m < 0.0) m = 0.0;
  return m;
}

PartialMoments gauss_partial_moments(double mean, double var, double lo, double hi) {
  if (!(var > 0.0)) throw std::invalid_argument("gauss_partial_moments: variance must be positive");
  PartialMoments out;
  if (!(lo <= hi)) return out;
  const double sd = std::sqrt(var);
  const double a = (lo - mean) / sd;
  const double b = (hi - mean) / sd;

  const double m0 = std_interval_mass(a, b);
  const double pa = norm_pdf(a);
  const double pb = norm_pdf(b);
  // z*pdf(z) -> 0 at infinite bounds.
  const double apa = std::isinf(a) ? 0.0 : a * pa;
  const double bpb = std::isinf(b) ? 0.0 : b * pb;

  const double e1 = pa - pb;              // E[Z; a<Z<b]
  const double e2 = m0 + apa - bpb;       // E[Z^2; a<Z<b]

  out.m0 = m0;
  out.m1 = mean * m0 + sd * e1;
  out.m2 = mean * mean * m0 + 2.0 * mean * sd * e1 + var * e2;
  return out;
}

}  // namespace hmsq
