#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hdclt/distributions.hpp"
#include "hdclt/estimate.hpp"

namespace hdclt {

enum class CornerStrategy { pooled_corners, quantile_grid, fixed };

// Candidate rectangle corners for the empirical sup. pooled_corners uses
// the pooled sample points (exact in p = 1, a lower-bound family in
// p >= 2). quantile_grid builds a tensor grid of k marginal quantiles per
// axis, capped at kMaxCorners corners by restricting to the
// min(p, kAxisCap) axes with the largest marginal discrepancy; dropped
// axes are left unconstrained.
class RectangleFamily {
 public:
  static RectangleFamily pooled_corners();
  static RectangleFamily quantile_grid(int k_per_axis);
  static RectangleFamily fixed(std::vector<Eigen::VectorXd> corners);

  CornerStrategy strategy() const { return strategy_; }
  int k_per_axis() const { return k_; }
  const std::vector<Eigen::VectorXd>& fixed_corners() const { return fixed_; }

  static constexpr std::size_t kMaxCorners = 1000000;
  static constexpr int kAxisCap = 6;

 private:
  CornerStrategy strategy_ = CornerStrategy::pooled_corners;
  int k_ = 16;
  std::vector<Eigen::VectorXd> fixed_;
};

enum class Uncertainty { bootstrap, dkw_union };

struct EstimatorOptions {
  int bootstrap_resamples = 200;
  Uncertainty uncertainty = Uncertainty::bootstrap;
};

/// Empirical rectangle distance: max over materialized corners of the
/// absolute ECDF difference. A lower bound on the true sup up to the
/// corner-family bias. Deterministic for fixed inputs regardless of
/// worker count; swapping u and v reproduces the result bit for bit.
EstimateWithCI mu_hat(const SampleBatch& u, const SampleBatch& v,
                      const RectangleFamily& rects,
                      const EstimatorOptions& opts = {});

/// Smoothed rectangle distance mu(U + eps Z, V + eps Z), estimated in
/// Rao-Blackwellized form: E[1{x + eps Z <= r}] = prod_j Phi((r_j - x_j)/eps)
/// is evaluated analytically, no smoothing noise is injected.
EstimateWithCI smoothed_mu_hat(const SampleBatch& u, const SampleBatch& v,
                               double eps, const RectangleFamily& rects,
                               const EstimatorOptions& opts = {});

/// Pseudo-moment nu_order(X, Y) against the matched Gaussian. Exact atom
/// term plus Gaussian moment for finitely supported X (mutually singular
/// pair); the E||X||^order + E||Y||^order upper-bound surrogate otherwise,
/// flagged via upper_surrogate.
EstimateWithCI pseudo_moment_hat(const DistributionSpec& spec_x, int order,
                                 std::int64_t replications, std::uint64_t seed,
                                 std::uint64_t stream_id);

/// Lower bound on the order-3 ideal metric via the smooth test family
///   f(x) = sin(<t, x> + theta) / ||t||_1^3,  theta in {0, pi/2}.
/// Each member satisfies ||grad^3 f||_1 <= 1 since |<t,h>|^3 / ||t||_1^3
/// <= ||h||_inf^3, so the max over the family is a valid zeta_3 lower
/// bound up to Monte-Carlo error.
EstimateWithCI zeta3_lower_hat(const SampleBatch& u, const SampleBatch& v,
                               const std::vector<Eigen::VectorXd>& frequency_grid,
                               const EstimatorOptions& opts = {});

/// Default frequency grid: 32 seeded directions on the unit l1-sphere
/// times magnitudes {1/2, 1, 2, 4}.
std::vector<Eigen::VectorXd> default_frequency_grid(int p, std::uint64_t seed);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double slope_std_error = 0.0;
};

/// Least squares of log(error) on log(n).
RateFit rate_fit(const std::vector<std::pair<double, double>>& points);

}  // namespace hdclt
