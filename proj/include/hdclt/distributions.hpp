#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hdclt/matrix_core.hpp"

namespace hdclt {

// Family tags match the strings used in config files.
enum class Family { gaussian, spike13, spike12, product, multiplier };

enum class CoordinateLaw { normal, rademacher };

std::string family_tag(Family f);
Family family_from_tag(const std::string& tag);

// Centered random-vector law with exact second moments. The spike families
// have standard normal coordinates 1..p-1 and a three-atom last coordinate
// taking 0 with probability 1 - 1/gamma and +-gamma^a with probability
// 1/(2 gamma) each (a = 1/3 or 1/2). The multiplier family is xi * B with
// xi a unit-variance t(4) scalar and B a Rademacher coordinate vector:
// finite third moment, not sub-Gaussian. That error law is a concrete
// choice; only its moment properties matter.
class DistributionSpec {
 public:
  static DistributionSpec gaussian(CovarianceSpec cov);
  static DistributionSpec spike(int p, double gamma, Family which);
  static DistributionSpec product(std::vector<CoordinateLaw> coordinates);
  static DistributionSpec multiplier(int p);

  Family family() const { return family_; }
  int dim() const { return dim_; }
  double gamma() const { return gamma_; }
  /// Magnitude of the spike atoms, gamma^{1/3} or gamma^{1/2}.
  double spike_magnitude() const;
  /// Exact variance of the spike coordinate: gamma^{-1/3} or 1.
  double spike_variance() const;
  const std::vector<CoordinateLaw>& coordinates() const { return coords_; }
  const CovarianceSpec& gaussian_covariance() const;

  CovarianceSpec exact_covariance() const;
  /// The law of the matched Gaussian Y with E[YY^T] = E[XX^T].
  DistributionSpec gaussian_match() const;

 private:
  DistributionSpec() = default;
  Family family_ = Family::gaussian;
  int dim_ = 0;
  double gamma_ = 0.0;
  std::vector<CoordinateLaw> coords_;
  std::vector<CovarianceSpec> cov_;  // gaussian family only (0 or 1 entries)
};

// Matrix of i.i.d. draws, rows = replications. Identical
// (seed, stream_id, spec, count) reproduce identical bits regardless of
// worker count: every matrix entry is addressed by its own counter.
struct SampleBatch {
  Eigen::MatrixXd data;  // count x p
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  std::int64_t rows() const { return data.rows(); }
  int dim() const { return static_cast<int>(data.cols()); }
};

SampleBatch sample(const DistributionSpec& spec, std::int64_t count,
                   std::uint64_t seed, std::uint64_t stream_id);

/// Rows are n^{-1/2} (X_1 + ... + X_n) over fresh i.i.d. draws. Gaussian
/// specs use the exact stable law N(0, Sigma) directly (same distribution).
SampleBatch normalized_sum(const DistributionSpec& spec, std::int64_t n,
                           std::int64_t count, std::uint64_t seed,
                           std::uint64_t stream_id);

/// Exact P(sum of n spike coordinates = 0) =
///   sum_{k even} C(n,k) (1/gamma)^k (1-1/gamma)^{n-k} C(k,k/2) 2^{-k}.
/// Always >= (1 - 1/gamma)^n (the k = 0 term).
double spike_zero_probability(std::int64_t n, double gamma);

/// Unit-variance t(4) quantile (closed form); the multiplier error law.
double scaled_t4_quantile(double u);

}  // namespace hdclt
