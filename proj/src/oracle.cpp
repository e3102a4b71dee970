#include "hdclt/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "hdclt/normal.hpp"
#include "hdclt/rng.hpp"

namespace hdclt {

namespace {

bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  for (int j = 0; j < a.size(); ++j) {
    if (a(j) < b(j)) return true;
    if (a(j) > b(j)) return false;
  }
  return false;
}

bool within_tol(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double tol) {
  return (a - b).cwiseAbs().maxCoeff() <= tol;
}

// Sort atoms lexicographically and merge runs of coincident points.
// Atoms whose mass underflowed to exactly zero (deep binomial tails) are
// dropped; they carry no probability.
std::vector<Atom> sort_and_merge(std::vector<Atom> atoms) {
  std::sort(atoms.begin(), atoms.end(),
            [](const Atom& x, const Atom& y) { return lex_less(x.point, y.point); });
  std::vector<Atom> merged;
  merged.reserve(atoms.size());
  for (auto& a : atoms) {
    if (!merged.empty() &&
        within_tol(merged.back().point, a.point, AtomicLaw::kMergeTol)) {
      merged.back().mass += a.mass;
    } else {
      merged.push_back(std::move(a));
    }
  }
  merged.erase(std::remove_if(merged.begin(), merged.end(),
                              [](const Atom& a) { return a.mass == 0.0; }),
               merged.end());
  return merged;
}

int validate_order(int order) {
  if (order != 1 && order != 3) {
    throw std::invalid_argument("pseudo-moment order must be 1 or 3");
  }
  return order;
}

}  // namespace

AtomicLaw::AtomicLaw(int dim, std::vector<Atom> atoms)
    : dim_(dim), atoms_(std::move(atoms)) {
  if (dim_ < 1) throw std::invalid_argument("AtomicLaw: dim must be >= 1");
  if (atoms_.empty()) throw std::invalid_argument("AtomicLaw: needs at least one atom");
  if (atoms_.size() > kMaxAtoms) {
    std::ostringstream msg;
    msg << "AtomicLaw: atom count " << atoms_.size() << " exceeds guard " << kMaxAtoms;
    throw std::length_error(msg.str());
  }
  double total = 0.0;
  for (const auto& a : atoms_) {
    if (a.point.size() != dim_) {
      throw std::invalid_argument("AtomicLaw: atom dimension mismatch");
    }
    if (!a.point.allFinite()) {
      throw std::invalid_argument("AtomicLaw: atom point must be finite");
    }
    if (!(a.mass > 0.0)) {
      throw std::invalid_argument("AtomicLaw: masses must be positive");
    }
    total += a.mass;
  }
  if (std::fabs(total - 1.0) > 1e-12) {
    std::ostringstream msg;
    msg << "AtomicLaw: masses sum to " << total << ", expected 1 within 1e-12";
    throw std::invalid_argument(msg.str());
  }
  // Keep a canonical order and reject coincident points.
  std::sort(atoms_.begin(), atoms_.end(),
            [](const Atom& x, const Atom& y) { return lex_less(x.point, y.point); });
  for (std::size_t i = 1; i < atoms_.size(); ++i) {
    if (within_tol(atoms_[i - 1].point, atoms_[i].point, kMergeTol)) {
      throw std::invalid_argument("AtomicLaw: atom points must be pairwise distinct");
    }
  }
}

AtomicLaw AtomicLaw::dirac(Eigen::VectorXd point) {
  const int d = static_cast<int>(point.size());
  return AtomicLaw(d, {Atom{std::move(point), 1.0}});
}

AtomicLaw AtomicLaw::rademacher() {
  Eigen::VectorXd plus(1), minus(1);
  plus << 1.0;
  minus << -1.0;
  return AtomicLaw(1, {Atom{minus, 0.5}, Atom{plus, 0.5}});
}

Eigen::VectorXd AtomicLaw::mean() const {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(dim_);
  for (const auto& a : atoms_) m += a.mass * a.point;
  return m;
}

Eigen::MatrixXd AtomicLaw::covariance() const {
  const Eigen::VectorXd m = mean();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(dim_, dim_);
  for (const auto& a : atoms_) {
    const Eigen::VectorXd d = a.point - m;
    c += a.mass * (d * d.transpose());
  }
  return c;
}

double AtomicLaw::abs_moment(int order) const {
  validate_order(order);
  double s = 0.0;
  for (const auto& a : atoms_) {
    s += a.mass * std::pow(a.point.cwiseAbs().maxCoeff(), order);
  }
  return s;
}

AtomicLaw convolve(const AtomicLaw& a, const AtomicLaw& b) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("convolve: dimension mismatch");
  }
  // The atom-count guard applies after merging (lattice supports collapse
  // hard); the pre-merge pair list only gets a memory cap.
  const std::size_t count = a.size() * b.size();
  if (count > 8000000) {
    std::ostringstream msg;
    msg << "convolve: " << count << " atom pairs exceed the intermediate cap";
    throw std::length_error(msg.str());
  }
  std::vector<Atom> out;
  out.reserve(count);
  for (const auto& x : a.atoms()) {
    for (const auto& y : b.atoms()) {
      out.push_back(Atom{x.point + y.point, x.mass * y.mass});
    }
  }
  auto merged = sort_and_merge(std::move(out));
  if (merged.size() > AtomicLaw::kMaxAtoms) {
    std::ostringstream msg;
    msg << "convolve: " << merged.size() << " atoms after merging exceeds guard "
        << AtomicLaw::kMaxAtoms;
    throw std::length_error(msg.str());
  }
  return AtomicLaw(a.dim(), std::move(merged));
}

AtomicLaw convolution_power(const AtomicLaw& a, std::int64_t n) {
  if (n < 1) throw std::invalid_argument("convolution_power: n must be >= 1");
  // Binary doubling; the accumulator starts on the first set bit.
  AtomicLaw base = a;
  std::optional<AtomicLaw> acc;
  std::int64_t k = n;
  while (k > 0) {
    if (k & 1) acc = acc ? convolve(*acc, base) : base;
    k >>= 1;
    if (k > 0) base = convolve(base, base);
  }
  return *acc;
}

AtomicLaw scale(const AtomicLaw& a, double t) {
  if (t == 0.0) throw std::invalid_argument("scale: t must be nonzero");
  std::vector<Atom> out;
  out.reserve(a.size());
  for (const auto& x : a.atoms()) out.push_back(Atom{t * x.point, x.mass});
  return AtomicLaw(a.dim(), sort_and_merge(std::move(out)));
}

AtomicLaw product_law(const AtomicLaw& a, const AtomicLaw& b) {
  const std::size_t count = a.size() * b.size();
  if (count > AtomicLaw::kMaxAtoms) {
    throw std::length_error("product_law: atom count exceeds guard");
  }
  const int d = a.dim() + b.dim();
  std::vector<Atom> out;
  out.reserve(count);
  for (const auto& x : a.atoms()) {
    for (const auto& y : b.atoms()) {
      Eigen::VectorXd pt(d);
      pt << x.point, y.point;
      out.push_back(Atom{std::move(pt), x.mass * y.mass});
    }
  }
  return AtomicLaw(d, std::move(out));
}

namespace {

// Per-coordinate pooled distinct values of two atom sets.
std::vector<std::vector<double>> pooled_values(const AtomicLaw& a,
                                               const AtomicLaw& b) {
  const int p = a.dim();
  std::vector<std::vector<double>> vals(p);
  for (int j = 0; j < p; ++j) {
    auto& v = vals[j];
    v.reserve(a.size() + b.size());
    for (const auto& x : a.atoms()) v.push_back(x.point(j));
    for (const auto& y : b.atoms()) v.push_back(y.point(j));
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return vals;
}

}  // namespace

double exact_mu_atomic(const AtomicLaw& a, const AtomicLaw& b) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("exact_mu_atomic: dimension mismatch");
  }
  const int p = a.dim();
  const auto vals = pooled_values(a, b);

  double grid_size = 1.0;
  for (const auto& v : vals) grid_size *= static_cast<double>(v.size());
  if (grid_size > 1e8) {
    std::ostringstream msg;
    msg << "exact_mu_atomic: candidate corner grid of size " << grid_size
        << " exceeds guard 1e8";
    throw std::length_error(msg.str());
  }

  // Rank-encode every atom coordinate against the pooled values: with
  // corner threshold t = 2*index + (nonstrict ? 1 : 0) an atom passes
  // coordinate j iff 2*rank < t. Corner evaluation is then pure integer
  // comparison.
  const auto rank_atoms = [&](const AtomicLaw& law) {
    std::vector<std::vector<int>> ranks(law.size(), std::vector<int>(p));
    for (std::size_t i = 0; i < law.size(); ++i) {
      for (int j = 0; j < p; ++j) {
        const auto& v = vals[j];
        const auto it = std::lower_bound(v.begin(), v.end(), law.atoms()[i].point(j));
        ranks[i][j] = static_cast<int>(it - v.begin());
      }
    }
    return ranks;
  };
  const auto ranks_a = rank_atoms(a);
  const auto ranks_b = rank_atoms(b);

  // Odometer over per-coordinate thresholds 1..2*m_j (threshold 0 admits
  // nothing and never attains the sup beyond |0 - 0|).
  std::vector<int> thresh(p, 1);
  double best = 0.0;
  while (true) {
    double fa = 0.0, fb = 0.0;
    for (std::size_t i = 0; i < ranks_a.size(); ++i) {
      bool in = true;
      for (int j = 0; j < p; ++j) {
        if (2 * ranks_a[i][j] >= thresh[j]) { in = false; break; }
      }
      if (in) fa += a.atoms()[i].mass;
    }
    for (std::size_t i = 0; i < ranks_b.size(); ++i) {
      bool in = true;
      for (int j = 0; j < p; ++j) {
        if (2 * ranks_b[i][j] >= thresh[j]) { in = false; break; }
      }
      if (in) fb += b.atoms()[i].mass;
    }
    best = std::max(best, std::fabs(fa - fb));

    int j = 0;
    while (j < p) {
      if (++thresh[j] <= 2 * static_cast<int>(vals[j].size())) break;
      thresh[j] = 1;
      ++j;
    }
    if (j == p) break;
  }
  return best;
}

MuVsGaussianResult exact_mu_atomic_vs_gaussian(const AtomicLaw& a,
                                               const CovarianceSpec& diag_cov) {
  if (a.dim() != diag_cov.dim()) {
    throw std::invalid_argument("exact_mu_atomic_vs_gaussian: dimension mismatch");
  }
  if (!diag_cov.is_diagonal()) {
    throw std::invalid_argument(
        "exact_mu_atomic_vs_gaussian: only diagonal covariances are supported; "
        "use the Monte Carlo estimator for general Sigma");
  }
  const int p = a.dim();
  std::vector<double> sigma(p);
  for (int j = 0; j < p; ++j) sigma[j] = std::sqrt(std::max(diag_cov.entries()(j, j), 0.0));

  // Candidates per coordinate: atom values, 64 Gaussian quantiles, +inf.
  constexpr int kQuantiles = 64;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> cand(p);
  for (int j = 0; j < p; ++j) {
    auto& v = cand[j];
    for (const auto& x : a.atoms()) v.push_back(x.point(j));
    if (sigma[j] > 0.0) {
      for (int i = 0; i < kQuantiles; ++i) {
        v.push_back(sigma[j] * normal_quantile((i + 0.5) / kQuantiles));
      }
    } else {
      v.push_back(0.0);  // degenerate coordinate: the CDF steps at 0
    }
    v.push_back(inf);
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }

  // Grid-gap bound: the Gaussian CDF's largest increment between adjacent
  // candidates, summed over coordinates (the atomic CDF is constant
  // between candidates).
  double gap_bound = 0.0;
  for (int j = 0; j < p; ++j) {
    if (sigma[j] == 0.0) continue;
    double max_gap = 0.0, prev_level = 0.0;
    for (const double v : cand[j]) {
      const double level = std::isinf(v) ? 1.0 : normal_cdf(v / sigma[j]);
      max_gap = std::max(max_gap, level - prev_level);
      prev_level = level;
    }
    gap_bound += max_gap;
  }

  const auto gauss_cdf = [&](int j, double v) {
    if (std::isinf(v)) return 1.0;
    if (sigma[j] == 0.0) return v >= 0.0 ? 1.0 : 0.0;
    return normal_cdf(v / sigma[j]);
  };

  double best = 0.0;
  if (p == 1) {
    // 1-d fast path: prefix masses over the sorted atoms.
    const auto& atoms = a.atoms();  // sorted by construction
    std::vector<double> prefix(atoms.size() + 1, 0.0);
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      prefix[i + 1] = prefix[i] + atoms[i].mass;
    }
    for (const double v : cand[0]) {
      const double g = gauss_cdf(0, v);
      const auto lo = std::lower_bound(
          atoms.begin(), atoms.end(), v,
          [](const Atom& x, double t) { return x.point(0) < t; });
      const auto hi = std::upper_bound(
          atoms.begin(), atoms.end(), v,
          [](double t, const Atom& x) { return t < x.point(0); });
      const double f_strict = prefix[lo - atoms.begin()];
      const double f_nonstrict = prefix[hi - atoms.begin()];
      best = std::max({best, std::fabs(f_strict - g), std::fabs(f_nonstrict - g)});
    }
    return MuVsGaussianResult{best, gap_bound};
  }

  double corners = 1.0;
  for (const auto& v : cand) corners *= static_cast<double>(v.size());
  if (corners > 1e8) {
    throw std::length_error("exact_mu_atomic_vs_gaussian: corner grid exceeds guard 1e8");
  }

  // The atomic CDF is piecewise constant and the Gaussian CDF is
  // coordinatewise monotone, so the sup is attained in the limit at
  // all-strict or all-nonstrict corners; mixed flavors are not needed.
  std::vector<std::size_t> idx(p, 0);
  Eigen::VectorXd corner(p);
  while (true) {
    for (int j = 0; j < p; ++j) corner(j) = cand[j][idx[j]];
    double g = 1.0;
    for (int j = 0; j < p; ++j) g *= gauss_cdf(j, corner(j));
    double f_strict = 0.0, f_nonstrict = 0.0;
    for (const auto& x : a.atoms()) {
      bool in_s = true, in_ns = true;
      for (int j = 0; j < p && (in_s || in_ns); ++j) {
        const double c = x.point(j);
        if (!(c < corner(j))) in_s = false;
        if (!(c <= corner(j))) in_ns = false;
      }
      if (in_s) f_strict += x.mass;
      if (in_ns) f_nonstrict += x.mass;
    }
    best = std::max({best, std::fabs(f_strict - g), std::fabs(f_nonstrict - g)});

    int j = 0;
    while (j < p) {
      if (++idx[j] < cand[j].size()) break;
      idx[j] = 0;
      ++j;
    }
    if (j == p) break;
  }
  return MuVsGaussianResult{best, gap_bound};
}

double exact_pseudo_moment(const AtomicLaw& a, const AtomicLaw& b, int order) {
  validate_order(order);
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("exact_pseudo_moment: dimension mismatch");
  }
  // Two-pointer walk over the lexicographically sorted atom lists.
  const auto& xs = a.atoms();
  const auto& ys = b.atoms();
  const auto weight = [order](const Eigen::VectorXd& pt) {
    return std::pow(pt.cwiseAbs().maxCoeff(), order);
  };
  double total = 0.0;
  std::size_t i = 0, k = 0;
  while (i < xs.size() && k < ys.size()) {
    if (within_tol(xs[i].point, ys[k].point, AtomicLaw::kMergeTol)) {
      total += std::fabs(xs[i].mass - ys[k].mass) * weight(xs[i].point);
      ++i;
      ++k;
    } else if (lex_less(xs[i].point, ys[k].point)) {
      total += xs[i].mass * weight(xs[i].point);
      ++i;
    } else {
      total += ys[k].mass * weight(ys[k].point);
      ++k;
    }
  }
  for (; i < xs.size(); ++i) total += xs[i].mass * weight(xs[i].point);
  for (; k < ys.size(); ++k) total += ys[k].mass * weight(ys[k].point);
  return total;
}

std::optional<AtomicLaw> atomic_law_of(const DistributionSpec& spec) {
  if ((spec.family() == Family::spike13 || spec.family() == Family::spike12) &&
      spec.dim() == 1) {
    const double inv_g = 1.0 / spec.gamma();
    const double mag = spec.spike_magnitude();
    Eigen::VectorXd zero(1), plus(1), minus(1);
    zero << 0.0;
    plus << mag;
    minus << -mag;
    return AtomicLaw(1, {Atom{minus, 0.5 * inv_g}, Atom{zero, 1.0 - inv_g},
                         Atom{plus, 0.5 * inv_g}});
  }
  if (spec.family() == Family::product) {
    for (const auto law : spec.coordinates()) {
      if (law != CoordinateLaw::rademacher) return std::nullopt;
    }
    if (spec.dim() > 20) return std::nullopt;  // 2^p atoms
    AtomicLaw out = AtomicLaw::rademacher();
    for (int j = 1; j < spec.dim(); ++j) out = product_law(out, AtomicLaw::rademacher());
    return out;
  }
  return std::nullopt;
}

EstimateWithCI pseudo_moment_vs_gaussian(const DistributionSpec& spec, int order,
                                         std::int64_t replications,
                                         std::uint64_t seed,
                                         std::uint64_t stream_id) {
  validate_order(order);
  const auto law = atomic_law_of(spec);
  if (!law) {
    throw std::invalid_argument(
        "pseudo_moment_vs_gaussian: spec has no finite atomic law");
  }
  const double x_term = law->abs_moment(order);
  const DistributionSpec match = spec.gaussian_match();

  EstimateWithCI est;
  est.method = EstimateMethod::plugin_moment;
  if (spec.dim() == 1) {
    const double s = std::sqrt(match.gaussian_covariance().entries()(0, 0));
    est.value = x_term + std::pow(s, order) * normal_abs_moment(order);
    est.replications = 0;
    est.ci_low = est.ci_high = est.value;
    return est;
  }
  const SampleBatch y = sample(match, replications, seed, stream_id);
  double sum = 0.0, sum_sq = 0.0;
  for (std::int64_t i = 0; i < y.rows(); ++i) {
    const double v = std::pow(y.data.row(i).cwiseAbs().maxCoeff(), order);
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(replications);
  const double mean = sum / n;
  const double var = std::max(sum_sq / n - mean * mean, 0.0);
  est.value = x_term + mean;
  est.std_error = std::sqrt(var / n);
  est.replications = replications;
  est.ci_low = est.value - 1.959963984540054 * est.std_error;
  est.ci_high = est.value + 1.959963984540054 * est.std_error;
  return est;
}

SampleBatch sample_atoms(const AtomicLaw& law, std::int64_t count,
                         std::uint64_t seed, std::uint64_t stream_id) {
  if (count < 1) throw std::invalid_argument("sample_atoms: count must be >= 1");
  std::vector<double> cum;
  cum.reserve(law.size());
  double acc = 0.0;
  for (const auto& a : law.atoms()) {
    acc += a.mass;
    cum.push_back(acc);
  }
  cum.back() = 1.0;

  PhiloxStream rng(seed, stream_id);
  SampleBatch batch;
  batch.seed = seed;
  batch.stream_id = stream_id;
  batch.data.resize(count, law.dim());
  for (std::int64_t i = 0; i < count; ++i) {
    const double u = rng.uniform_at(static_cast<std::uint64_t>(i));
    const auto it = std::lower_bound(cum.begin(), cum.end(), u);
    const std::size_t k = std::min<std::size_t>(it - cum.begin(), law.size() - 1);
    batch.data.row(i) = law.atoms()[k].point;
  }
  return batch;
}

}  // namespace hdclt
