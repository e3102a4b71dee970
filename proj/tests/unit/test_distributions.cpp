#include <doctest.h>

#include <cmath>
#include <set>

#include "hdclt/distributions.hpp"
#include "hdclt/normal.hpp"

using namespace hdclt;

namespace {

struct MeanSe {
  double mean;
  double se;
};

MeanSe column_mean(const SampleBatch& b, int j, int power = 1) {
  double sum = 0.0, sum_sq = 0.0;
  for (std::int64_t i = 0; i < b.rows(); ++i) {
    const double v = power == 1 ? b.data(i, j) : std::pow(b.data(i, j), power);
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(b.rows());
  const double mean = sum / n;
  return MeanSe{mean, std::sqrt(std::max(sum_sq / n - mean * mean, 0.0) / n)};
}

}  // namespace

TEST_CASE("sampling is deterministic in (seed, stream)") {
  const auto spec = DistributionSpec::spike(3, 4.0, Family::spike13);
  const SampleBatch a = sample(spec, 64, 9, 2);
  const SampleBatch b = sample(spec, 64, 9, 2);
  CHECK(a.data == b.data);
  const SampleBatch c = sample(spec, 64, 9, 3);
  CHECK(a.data != c.data);
}

TEST_CASE("gaussian sampling shape and finiteness") {
  const auto spec = DistributionSpec::gaussian(CovarianceSpec::identity(2));
  const SampleBatch batch = sample(spec, 4, 1, 0);
  CHECK(batch.data.rows() == 4);
  CHECK(batch.data.cols() == 2);
  CHECK(batch.data.allFinite());
}

TEST_CASE("spike zero-atom frequency matches 1 - 1/gamma") {
  const auto spec = DistributionSpec::spike(1, 4.0, Family::spike13);
  const SampleBatch batch = sample(spec, 1000000, 17, 0);
  std::int64_t zeros = 0;
  for (std::int64_t i = 0; i < batch.rows(); ++i) {
    if (batch.data(i, 0) == 0.0) ++zeros;
  }
  const double freq = static_cast<double>(zeros) / static_cast<double>(batch.rows());
  const double se = std::sqrt(0.75 * 0.25 / static_cast<double>(batch.rows()));
  CHECK(std::fabs(freq - 0.75) <= 3.0 * se);
}

TEST_CASE("spike12 coordinate has unit variance") {
  const auto spec = DistributionSpec::spike(3, 2.0, Family::spike12);
  const SampleBatch batch = sample(spec, 1000000, 23, 1);
  const auto second = column_mean(batch, 2, 2);
  CHECK(std::fabs(second.mean - 1.0) <= 3.0 * second.se);
}

TEST_CASE("exact covariances") {
  const auto s13 = DistributionSpec::spike(2, 8.0, Family::spike13);
  const Eigen::MatrixXd c13 = s13.exact_covariance().entries();
  CHECK(c13(0, 0) == 1.0);
  CHECK(c13(1, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(c13(0, 1) == 0.0);

  const auto s12 = DistributionSpec::spike(2, 5.0, Family::spike12);
  CHECK(s12.exact_covariance().entries().isApprox(Eigen::MatrixXd::Identity(2, 2)));

  Eigen::MatrixXd sigma(2, 2);
  sigma << 2, 1, 1, 2;
  const auto g = DistributionSpec::gaussian(CovarianceSpec(sigma));
  CHECK(g.exact_covariance().entries() == sigma);
}

TEST_CASE("gaussian_match") {
  const auto s12 = DistributionSpec::spike(4, 5.0, Family::spike12);
  const auto match = s12.gaussian_match();
  CHECK(match.family() == Family::gaussian);
  CHECK(match.gaussian_covariance().entries().isApprox(Eigen::MatrixXd::Identity(4, 4)));

  const auto s13 = DistributionSpec::spike(1, 4.0, Family::spike13);
  CHECK(s13.gaussian_match().gaussian_covariance().entries()(0, 0) ==
        doctest::Approx(std::pow(4.0, -1.0 / 3.0)).epsilon(1e-12));

  Eigen::MatrixXd sigma(2, 2);
  sigma << 2, 1, 1, 2;
  const auto g = DistributionSpec::gaussian(CovarianceSpec(sigma));
  CHECK(g.gaussian_match().gaussian_covariance().entries() == sigma);
}

TEST_CASE("normalized_sum: gaussian shortcut, n = 1 identity, spike support") {
  const auto g = DistributionSpec::gaussian(CovarianceSpec::identity(2));
  CHECK(normalized_sum(g, 37, 16, 3, 5).data == sample(g, 16, 3, 5).data);

  const auto spec = DistributionSpec::spike(1, 2.0, Family::spike13);
  CHECK(normalized_sum(spec, 1, 128, 3, 6).data == sample(spec, 128, 3, 6).data);

  const SampleBatch sums = normalized_sum(spec, 2, 1000, 3, 7);
  const double unit = std::cbrt(2.0) / std::sqrt(2.0);
  for (std::int64_t i = 0; i < sums.rows(); ++i) {
    const double v = sums.data(i, 0);
    bool ok = false;
    for (const double target : {0.0, unit, -unit, 2.0 * unit, -2.0 * unit}) {
      ok = ok || std::fabs(v - target) <= 1e-12;
    }
    CHECK(ok);
  }
}

TEST_CASE("normalized_sum block associativity (moment agreement)") {
  const auto spec = DistributionSpec::spike(1, 3.0, Family::spike13);
  const std::int64_t reps = 200000;
  const SampleBatch direct = normalized_sum(spec, 12, reps, 11, 0);
  const SampleBatch blocks = normalized_sum(spec, 3, 4 * reps, 11, 1);
  // Combine 4 consecutive block rows: same law as the direct n = 12 sum.
  SampleBatch combined;
  combined.data.resize(reps, 1);
  for (std::int64_t i = 0; i < reps; ++i) {
    combined.data(i, 0) = (blocks.data(4 * i, 0) + blocks.data(4 * i + 1, 0) +
                           blocks.data(4 * i + 2, 0) + blocks.data(4 * i + 3, 0)) /
                          2.0;
  }
  const auto m1 = column_mean(direct, 0, 1);
  const auto m2 = column_mean(combined, 0, 1);
  CHECK(std::fabs(m1.mean - m2.mean) <= 5.0 * std::hypot(m1.se, m2.se));
  const auto v1 = column_mean(direct, 0, 2);
  const auto v2 = column_mean(combined, 0, 2);
  CHECK(std::fabs(v1.mean - v2.mean) <= 5.0 * std::hypot(v1.se, v2.se));
}

TEST_CASE("families are centered with the advertised covariance") {
  const std::int64_t reps = 1000000;
  std::vector<DistributionSpec> specs = {
      DistributionSpec::spike(2, 6.0, Family::spike13),
      DistributionSpec::product({CoordinateLaw::normal, CoordinateLaw::rademacher}),
      DistributionSpec::multiplier(2),
  };
  std::uint64_t stream = 0;
  for (const auto& spec : specs) {
    const SampleBatch batch = sample(spec, reps, 29, stream++);
    const Eigen::MatrixXd cov = spec.exact_covariance().entries();
    for (int j = 0; j < spec.dim(); ++j) {
      const auto m = column_mean(batch, j, 1);
      CHECK(std::fabs(m.mean) <= 5.0 * m.se);
      const auto v = column_mean(batch, j, 2);
      CHECK(std::fabs(v.mean - cov(j, j)) <= 5.0 * v.se);
    }
    // Off-diagonal of the first pair.
    if (spec.dim() >= 2) {
      double sum = 0.0, sum_sq = 0.0;
      for (std::int64_t i = 0; i < reps; ++i) {
        const double v = batch.data(i, 0) * batch.data(i, 1);
        sum += v;
        sum_sq += v * v;
      }
      const double mean = sum / static_cast<double>(reps);
      const double se = std::sqrt((sum_sq / static_cast<double>(reps) - mean * mean) /
                                  static_cast<double>(reps));
      CHECK(std::fabs(mean - cov(0, 1)) <= 5.0 * se);
    }
  }
}

TEST_CASE("spike_zero_probability reference values and floor") {
  CHECK(spike_zero_probability(2, 2.0) == doctest::Approx(0.375).epsilon(1e-12));
  CHECK(spike_zero_probability(1, 10.0) == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(spike_zero_probability(10, 10.0) ==
        doctest::Approx(0.44976181648007824).epsilon(1e-12));
  for (const double gamma : {1.5, 2.0, 4.0, 10.0}) {
    for (std::int64_t n = 1; n <= 20; ++n) {
      CHECK(spike_zero_probability(n, gamma) >=
            std::pow(1.0 - 1.0 / gamma, static_cast<double>(n)));
    }
  }
}

TEST_CASE("scaled t4 quantile matches the reference and has unit variance") {
  CHECK(scaled_t4_quantile(0.9) * std::sqrt(2.0) ==
        doctest::Approx(1.5332062740589436).epsilon(1e-9));
  CHECK(scaled_t4_quantile(0.5) == 0.0);
  CHECK(scaled_t4_quantile(0.25) == doctest::Approx(-scaled_t4_quantile(0.75)).epsilon(1e-12));

  const auto spec = DistributionSpec::multiplier(1);
  const SampleBatch batch = sample(spec, 500000, 31, 0);
  const auto v = column_mean(batch, 0, 2);
  CHECK(std::fabs(v.mean - 1.0) <= 5.0 * v.se);
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS(DistributionSpec::spike(2, 1.0, Family::spike13), std::invalid_argument);
  CHECK_THROWS_AS(DistributionSpec::spike(0, 4.0, Family::spike12), std::invalid_argument);
  CHECK_THROWS_AS(family_from_tag("cauchy"), std::invalid_argument);
  CHECK(family_from_tag("spike12") == Family::spike12);
  const auto spec = DistributionSpec::spike(1, 2.0, Family::spike13);
  CHECK_THROWS_AS(sample(spec, 0, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(normalized_sum(spec, 0, 10, 1, 0), std::invalid_argument);
}
