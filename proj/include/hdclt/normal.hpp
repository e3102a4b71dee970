#pragma once

#include <cmath>

namespace hdclt {

/// Standard normal density.
inline double normal_pdf(double x) {
  static const double inv_sqrt_2pi = 0.3989422804014326779399461;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

/// Standard normal CDF via the complementary error function.
/// Absolute error is at the level of erfc itself (~1e-16).
inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x * 0.7071067811865475244008444);
}

/// Inverse standard normal CDF (Wichura's AS 241, double precision).
double normal_quantile(double p);

/// E|Z|^order for Z ~ N(0,1), order in {1, 3}.
/// E|Z| = sqrt(2/pi), E|Z|^3 = 2 sqrt(2/pi).
double normal_abs_moment(int order);

}  // namespace hdclt
