#pragma once

#include <limits>

namespace hmsq {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Standard normal density and distribution functions. The CDF/SF go through
// erfc so interval masses keep full relative precision deep in the tails,
// which the belief-update arithmetic depends on.
double norm_pdf(double z);
double norm_cdf(double z);
double norm_sf(double z);
double norm_logpdf(double z);

// P[lo < X < hi] for X ~ N(mean, var). Bounds may be infinite.
double gauss_interval_mass(double mean, double var, double lo, double hi);

// Log density of N(mean, var) at x.
double gauss_logpdf(double x, double mean, double var);

// Unnormalized moments of N(mean, var) restricted to (lo, hi):
//   m0 = P[lo < X < hi],  m1 = E[X; lo<X<hi],  m2 = E[X^2; lo<X<hi].
struct PartialMoments {
  double m0 = 0.0;
  double m1 = 0.0;
  double m2 = 0.0;
};
PartialMoments gauss_partial_moments(double mean, double var, double lo, double hi);

}  // namespace hmsq
