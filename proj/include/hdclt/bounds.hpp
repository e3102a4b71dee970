#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace hdclt {

// Inputs of the main bound. Unknown universal constants are explicit
// inputs with default 1; experiments fit them empirically instead of
// assuming values the source results only assert to exist.
struct BoundInputs {
  std::int64_t n = 1;
  int p = 1;
  double nu1 = 0.0;
  double nu3 = 0.0;
  double sigma_min = 1.0;
  double sigma_under = 1.0;
  double c_universal = 1.0;
};

/// Main Berry-Esseen bound:
///   3/sqrt(n) + c nu1 log(ep) sqrt(log(pn)) / (sqrt(n) sigma_min)
///   + c nu3 log^2(ep) sqrt(log(pn)) / (sqrt(n) sigma_min sigma_under^2)
///     * { (sigma_min/sigma_under)/log(ep)
///         + log(1 + sigma_under^3 sqrt(n/log^3(ep)) / (2 c nu3)) }.
/// nu3 = 0 drops the third term (x log(1 + c/x) -> 0).
double theorem1_rhs(const BoundInputs& b);

/// Comparison bound: C nu^{5/2} / rho^{3/2} * log^4(pn) log(en) / sqrt(n).
double lopes_rhs(double nu, double rho, std::int64_t n, int p, double C);

/// Gaussian anti-concentration over a width-delta band of rectangles:
///   C sqrt(log(ep)) delta / sigma_min.
double nazarov_rhs(double sigma_min, int p, double delta, double C);

/// Smoothing function phi_eps(s, r) = P(s + eps Z <= r)
///   = prod_j Phi((r_j - s_j) / eps).
double phi_eps(const Eigen::VectorXd& s, const Eigen::VectorXd& r, double eps);

struct GradNormProbe {
  double empirical_sup = 0.0;
  /// Implied constant: sup * eps^order / log(ep)^{order/2}.
  double fitted_c = 0.0;
};

/// Empirical sup of ||grad phi_eps||_1 (order 1, closed form) or of the
/// directional third derivative over 64 random ||h||_inf <= 1 directions
/// via 5-point finite differences (order 3), over the given probe points.
GradNormProbe grad_norm_probe(int order, double eps, int p,
                              const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& probe_points,
                              std::uint64_t seed = 0);

struct EpsilonLadder {
  std::vector<double> values;  // eps_j = sqrt(eps^2 + sigma_under^2 j / n)
  double sum_inv_sq = 0.0;     // sum 1/eps_j^2
  double sum_inv_cube = 0.0;   // sum 1/eps_j^3
  double bound_inv_sq = 0.0;   // (2n/sigma_under^2) log(1 + sigma_under/eps)
  double bound_inv_cube = 0.0; // 2n / (eps sigma_under^2)
};

EpsilonLadder epsilon_ladder(std::int64_t n, double eps, double sigma_under,
                             std::int64_t m);

/// The proof's smoothing level:
///   K { nu1 sqrt(log(ep))/sqrt(n) + nu3 log(ep)^{3/2} / (sigma_under^2 sqrt(n)) }.
double proof_epsilon_choice(const BoundInputs& b, double k_constant);

}  // namespace hdclt
