#include "hdclt/bounds.hpp"

#include <cmath>
#include <stdexcept>

#include "hdclt/normal.hpp"
#include "hdclt/rng.hpp"

namespace hdclt {

namespace {

const double kE = 2.718281828459045235360287;

void validate(const BoundInputs& b) {
  if (b.n < 1) throw std::invalid_argument("bound inputs: n must be >= 1");
  if (b.p < 1) throw std::invalid_argument("bound inputs: p must be >= 1");
  if (b.nu1 < 0.0 || b.nu3 < 0.0) {
    throw std::invalid_argument("bound inputs: pseudo-moments must be nonnegative");
  }
  if (!(b.sigma_min > 0.0) || !(b.sigma_under > 0.0)) {
    throw std::invalid_argument("bound inputs: sigma_min and sigma_under must be positive");
  }
  if (!(b.c_universal > 0.0)) {
    throw std::invalid_argument("bound inputs: universal constant must be positive");
  }
}

double log_ep(int p) { return std::log(kE * static_cast<double>(p)); }
double log_pn(std::int64_t n, int p) {
  return std::log(static_cast<double>(p) * static_cast<double>(n));
}

}  // namespace

double theorem1_rhs(const BoundInputs& b) {
  validate(b);
  const double n = static_cast<double>(b.n);
  const double lep = log_ep(b.p);
  const double lpn = log_pn(b.n, b.p);
  double total = 3.0 / std::sqrt(n);
  total += b.c_universal * b.nu1 * lep * std::sqrt(lpn) / (std::sqrt(n) * b.sigma_min);
  if (b.nu3 > 0.0) {
    const double brace =
        (b.sigma_min / b.sigma_under) / lep +
        std::log1p(std::pow(b.sigma_under, 3) * std::sqrt(n / std::pow(lep, 3)) /
                   (2.0 * b.c_universal * b.nu3));
    total += b.c_universal * b.nu3 * lep * lep * std::sqrt(lpn) /
             (std::sqrt(n) * b.sigma_min * b.sigma_under * b.sigma_under) * brace;
  }
  return total;
}

double lopes_rhs(double nu, double rho, std::int64_t n, int p, double C) {
  if (!(nu > 0.0)) throw std::invalid_argument("lopes_rhs: nu must be positive");
  if (!(rho > 0.0 && rho <= 1.0)) {
    throw std::invalid_argument("lopes_rhs: rho must lie in (0, 1]");
  }
  if (n < 1 || p < 1) throw std::invalid_argument("lopes_rhs: n, p must be >= 1");
  if (!(C > 0.0)) throw std::invalid_argument("lopes_rhs: C must be positive");
  const double lpn = log_pn(n, p);
  const double len = std::log(kE * static_cast<double>(n));
  return C * std::pow(nu, 2.5) / std::pow(rho, 1.5) * std::pow(lpn, 4) * len /
         std::sqrt(static_cast<double>(n));
}

double nazarov_rhs(double sigma_min, int p, double delta, double C) {
  if (!(sigma_min > 0.0)) throw std::invalid_argument("nazarov_rhs: sigma_min must be positive");
  if (p < 1) throw std::invalid_argument("nazarov_rhs: p must be >= 1");
  if (delta < 0.0) throw std::invalid_argument("nazarov_rhs: delta must be >= 0");
  if (!(C > 0.0)) throw std::invalid_argument("nazarov_rhs: C must be positive");
  return C * std::sqrt(log_ep(p)) * delta / sigma_min;
}

double phi_eps(const Eigen::VectorXd& s, const Eigen::VectorXd& r, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("phi_eps: eps must be > 0");
  if (s.size() != r.size()) throw std::invalid_argument("phi_eps: dimension mismatch");
  double prod = 1.0;
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    const double d = r(j) - s(j);
    if (std::isinf(d) && d > 0.0) continue;  // Phi(+inf) = 1
    prod *= normal_cdf(d / eps);
  }
  return prod;
}

namespace {

// ||grad phi_eps||_1 in closed form: the j-th partial is the Gaussian
// density at coordinate j times the product of the other coordinates'
// CDFs, divided by eps.
double grad_l1_closed_form(const Eigen::VectorXd& s, const Eigen::VectorXd& r, double eps) {
  const Eigen::Index p = s.size();
  Eigen::VectorXd z = (r - s) / eps;
  Eigen::VectorXd cdf(p), pdf(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    cdf(j) = normal_cdf(z(j));
    pdf(j) = normal_pdf(z(j));
  }
  double total = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) {
    double prod = pdf(j) / eps;
    for (Eigen::Index k = 0; k < p; ++k) {
      if (k != j) prod *= cdf(k);
    }
    total += prod;
  }
  return total;
}

}  // namespace

GradNormProbe grad_norm_probe(int order, double eps, int p,
                              const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& probe_points,
                              std::uint64_t seed) {
  if (order != 1 && order != 3) {
    throw std::invalid_argument("grad_norm_probe: order must be 1 or 3");
  }
  if (!(eps > 0.0)) throw std::invalid_argument("grad_norm_probe: eps must be > 0");
  if (probe_points.empty()) {
    throw std::invalid_argument("grad_norm_probe: needs probe points");
  }
  for (const auto& [s, r] : probe_points) {
    if (s.size() != p || r.size() != p) {
      throw std::invalid_argument("grad_norm_probe: probe dimension mismatch");
    }
    if (!s.allFinite() || !r.allFinite()) {
      throw std::invalid_argument("grad_norm_probe: probes must be finite");
    }
  }

  double sup = 0.0;
  if (order == 1) {
    for (const auto& [s, r] : probe_points) {
      sup = std::max(sup, grad_l1_closed_form(s, r, eps));
    }
  } else {
    const double step = eps / 8.0;
    if (step < 1e-150 || step * step * step == 0.0) {
      throw std::invalid_argument(
          "grad_norm_probe: finite-difference step underflows; use a larger eps");
    }
    constexpr int kDirections = 64;
    PhiloxStream rng(mix64(seed, 0x67726164u), 0);  // "grad"
    std::vector<Eigen::VectorXd> dirs(kDirections);
    for (int d = 0; d < kDirections; ++d) {
      Eigen::VectorXd h(p);
      for (int j = 0; j < p; ++j) {
        h(j) = 2.0 * rng.uniform_at(static_cast<std::uint64_t>(d) * p + j) - 1.0;
      }
      h /= h.cwiseAbs().maxCoeff();  // ||h||_inf = 1
      dirs[d] = std::move(h);
    }
    const double denom = 2.0 * step * step * step;
    for (const auto& [s, r] : probe_points) {
      for (const auto& h : dirs) {
        const double g_m2 = phi_eps(s - 2.0 * step * h, r, eps);
        const double g_m1 = phi_eps(s - step * h, r, eps);
        const double g_p1 = phi_eps(s + step * h, r, eps);
        const double g_p2 = phi_eps(s + 2.0 * step * h, r, eps);
        // d/dt of phi(s + t h) flips sign relative to shifting s, but the
        // 5-point stencil is odd so only the magnitude matters.
        const double d3 = (-g_m2 + 2.0 * g_m1 - 2.0 * g_p1 + g_p2) / denom;
        sup = std::max(sup, std::fabs(d3));
      }
    }
  }
  GradNormProbe probe;
  probe.empirical_sup = sup;
  probe.fitted_c =
      sup * std::pow(eps, order) / std::pow(log_ep(p), 0.5 * static_cast<double>(order));
  return probe;
}

EpsilonLadder epsilon_ladder(std::int64_t n, double eps, double sigma_under,
                             std::int64_t m) {
  if (n < 1) throw std::invalid_argument("epsilon_ladder: n must be >= 1");
  if (!(eps > 0.0)) throw std::invalid_argument("epsilon_ladder: eps must be > 0");
  if (!(sigma_under > 0.0)) {
    throw std::invalid_argument("epsilon_ladder: sigma_under must be > 0");
  }
  if (m < 1 || m > n) throw std::invalid_argument("epsilon_ladder: need 1 <= m <= n");
  EpsilonLadder ladder;
  ladder.values.reserve(static_cast<std::size_t>(m));
  const double s2 = sigma_under * sigma_under;
  for (std::int64_t j = 1; j <= m; ++j) {
    const double ej = std::sqrt(eps * eps + s2 * static_cast<double>(j) / static_cast<double>(n));
    ladder.values.push_back(ej);
    ladder.sum_inv_sq += 1.0 / (ej * ej);
    ladder.sum_inv_cube += 1.0 / (ej * ej * ej);
  }
  ladder.bound_inv_sq =
      2.0 * static_cast<double>(n) / s2 * std::log1p(sigma_under / eps);
  ladder.bound_inv_cube = 2.0 * static_cast<double>(n) / (eps * s2);
  return ladder;
}

double proof_epsilon_choice(const BoundInputs& b, double k_constant) {
  validate(b);
  if (!(k_constant > 0.0)) {
    throw std::invalid_argument("proof_epsilon_choice: constant must be positive");
  }
  const double n = static_cast<double>(b.n);
  const double lep = log_ep(b.p);
  return k_constant * (b.nu1 * std::sqrt(lep) / std::sqrt(n) +
                       b.nu3 * std::pow(lep, 1.5) /
                           (b.sigma_under * b.sigma_under * std::sqrt(n)));
}

}  // namespace hdclt
