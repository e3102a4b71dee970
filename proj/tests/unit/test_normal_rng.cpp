#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "hdclt/normal.hpp"
#include "hdclt/rng.hpp"

using namespace hdclt;

namespace {

// Independent high-precision reference for the standard normal CDF:
// Taylor series around 0 in long double for moderate x, continued
// fraction for the tail. Test-only; shares nothing with the library path.
long double phi_reference(long double x) {
  const long double ax = std::fabs(x);
  long double result;
  if (ax < 7.0L) {
    // Phi(x) = 1/2 + pdf(x) * (x + x^3/3 + x^5/(3*5) + ...)
    long double term = ax;
    long double sum = ax;
    for (int k = 1; k < 400; ++k) {
      term *= ax * ax / (2.0L * k + 1.0L);
      sum += term;
      if (term < 1e-25L * sum) break;
    }
    const long double pdf =
        std::exp(-0.5L * ax * ax) * 0.398942280401432677939946L;
    result = 0.5L + pdf * sum;
  } else {
    // Mills ratio continued fraction for the upper tail.
    long double cf = 0.0L;
    for (int k = 60; k >= 1; --k) cf = k / (ax + cf);
    const long double pdf =
        std::exp(-0.5L * ax * ax) * 0.398942280401432677939946L;
    result = 1.0L - pdf / (ax + cf);
  }
  return x >= 0 ? result : 1.0L - result;
}

}  // namespace

TEST_CASE("normal_cdf matches the reference series to 1e-12") {
  for (double x = -8.0; x <= 8.0; x += 0.0625) {
    const double ref = static_cast<double>(phi_reference(x));
    CHECK(std::fabs(normal_cdf(x) - ref) <= 1e-12);
  }
}

TEST_CASE("normal_quantile inverts normal_cdf") {
  for (double u = 1e-10; u < 1.0; u += 0.0007) {
    const double x = normal_quantile(u);
    CHECK(std::fabs(normal_cdf(x) - u) <= 1e-12);
  }
  CHECK(normal_quantile(0.5) == 0.0);
  CHECK(std::isinf(normal_quantile(0.0)));
  CHECK(std::isinf(normal_quantile(1.0)));
  CHECK_THROWS_AS(normal_quantile(-0.1), std::invalid_argument);
}

TEST_CASE("gaussian absolute moments") {
  CHECK(normal_abs_moment(1) == doctest::Approx(0.7978845608028654).epsilon(1e-14));
  CHECK(normal_abs_moment(3) == doctest::Approx(1.5957691216057308).epsilon(1e-14));
  CHECK_THROWS_AS(normal_abs_moment(2), std::invalid_argument);
}

TEST_CASE("philox streams are deterministic and positional") {
  PhiloxStream a(42, 7);
  PhiloxStream b(42, 7);
  for (std::uint64_t i = 0; i < 64; ++i) {
    CHECK(a.u64_at(i) == b.u64_at(i));
  }
  PhiloxStream c(42, 8);
  int differs = 0;
  for (std::uint64_t i = 0; i < 64; ++i) {
    if (a.u64_at(i) != c.u64_at(i)) ++differs;
  }
  CHECK(differs > 60);

  // The sequential wrapper walks the same positional values.
  SequentialRng seq(a);
  for (std::uint64_t i = 0; i < 16; ++i) {
    CHECK(seq.next_u32() == a.u32_at(i));
  }
}

TEST_CASE("philox uniforms look uniform") {
  PhiloxStream s(1, 0);
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform_at(static_cast<std::uint64_t>(i));
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    sum += u;
    sum_sq += u * u;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::fabs(mean - 0.5) < 5.0 / std::sqrt(12.0 * n));
  CHECK(std::fabs(var - 1.0 / 12.0) < 0.002);
}

TEST_CASE("philox normals have unit variance") {
  PhiloxStream s(3, 1);
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = s.normal_at(static_cast<std::uint64_t>(i));
    sum += z;
    sum_sq += z * z;
  }
  const double mean = sum / n;
  CHECK(std::fabs(mean) < 5.0 / std::sqrt(static_cast<double>(n)));
  CHECK(sum_sq / n - mean * mean == doctest::Approx(1.0).epsilon(0.02));
}
