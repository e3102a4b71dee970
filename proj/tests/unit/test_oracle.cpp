#include <doctest.h>

#include <cmath>
#include <vector>

#include "hdclt/normal.hpp"
#include "hdclt/oracle.hpp"
#include "hdclt/rng.hpp"

using namespace hdclt;

namespace {

Eigen::VectorXd vec1(double x) {
  Eigen::VectorXd v(1);
  v << x;
  return v;
}

Eigen::VectorXd vec2(double x, double y) {
  Eigen::VectorXd v(2);
  v << x, y;
  return v;
}

AtomicLaw random_law(SequentialRng& rng, int p, int max_atoms) {
  const int k = 2 + static_cast<int>(rng.next_index(static_cast<std::uint32_t>(max_atoms - 1)));
  std::vector<Atom> atoms;
  std::vector<double> raw(k);
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    raw[i] = 0.2 + rng.next_uniform();
    total += raw[i];
  }
  double partial = 0.0;
  for (int i = 0; i < k; ++i) {
    Eigen::VectorXd pt(p);
    for (int j = 0; j < p; ++j) pt(j) = 4.0 * rng.next_uniform() - 2.0;
    const double mass = (i + 1 == k) ? 1.0 - partial : raw[i] / total;
    partial += mass;
    atoms.push_back(Atom{pt, mass});
  }
  return AtomicLaw(p, std::move(atoms));
}

// Fully independent brute force for the rectangle distance: a direct
// double loop over every pooled corner candidate (both strict flavors per
// coordinate) with literal comparisons and no pruning or rank encoding.
double brute_force_mu(const AtomicLaw& a, const AtomicLaw& b) {
  const int p = a.dim();
  std::vector<std::vector<double>> values(p);
  for (int j = 0; j < p; ++j) {
    for (const auto& x : a.atoms()) values[j].push_back(x.point(j));
    for (const auto& y : b.atoms()) values[j].push_back(y.point(j));
  }
  std::vector<std::size_t> idx(p, 0);
  std::vector<int> strict(p, 0);
  double best = 0.0;
  while (true) {
    // Evaluate both CDFs at the corner described by (idx, strict).
    double fa = 0.0, fb = 0.0;
    for (const auto& x : a.atoms()) {
      bool in = true;
      for (int j = 0; j < p; ++j) {
        const double v = values[j][idx[j]];
        if (strict[j] ? !(x.point(j) < v) : !(x.point(j) <= v)) in = false;
      }
      if (in) fa += x.mass;
    }
    for (const auto& y : b.atoms()) {
      bool in = true;
      for (int j = 0; j < p; ++j) {
        const double v = values[j][idx[j]];
        if (strict[j] ? !(y.point(j) < v) : !(y.point(j) <= v)) in = false;
      }
      if (in) fb += y.mass;
    }
    best = std::max(best, std::fabs(fa - fb));

    // Odometer over (value index, strictness) per coordinate.
    int j = 0;
    while (j < p) {
      if (strict[j] == 0) {
        strict[j] = 1;
        break;
      }
      strict[j] = 0;
      if (++idx[j] < values[j].size()) break;
      idx[j] = 0;
      ++j;
    }
    if (j == p) break;
  }
  return best;
}

}  // namespace

TEST_CASE("convolution basics") {
  const AtomicLaw rad = AtomicLaw::rademacher();
  const AtomicLaw delta = AtomicLaw::dirac(vec1(0.0));

  const AtomicLaw same = convolve(delta, rad);
  REQUIRE(same.size() == 2);
  CHECK(same.atoms()[0].point(0) == -1.0);
  CHECK(same.atoms()[1].point(0) == 1.0);

  const AtomicLaw two = convolve(rad, rad);
  REQUIRE(two.size() == 3);
  CHECK(two.atoms()[0].point(0) == -2.0);
  CHECK(two.atoms()[0].mass == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(two.atoms()[1].point(0) == 0.0);
  CHECK(two.atoms()[1].mass == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(two.atoms()[2].mass == doctest::Approx(0.25).epsilon(1e-15));

  // Two 2-atom laws in p = 2 give 4 atoms without collisions.
  const AtomicLaw a(2, {Atom{vec2(0, 0), 0.5}, Atom{vec2(1, 2), 0.5}});
  const AtomicLaw b(2, {Atom{vec2(0, 1), 0.5}, Atom{vec2(3, 0), 0.5}});
  CHECK(convolve(a, b).size() == 4);

  CHECK(convolution_power(rad, 4).size() == 5);
}

TEST_CASE("scale maps support and keeps masses") {
  const AtomicLaw rad = AtomicLaw::rademacher();
  const AtomicLaw same = scale(rad, 1.0);
  CHECK(same.atoms()[0].point(0) == -1.0);
  const AtomicLaw doubled = scale(rad, 2.0);
  CHECK(doubled.atoms()[0].point(0) == -2.0);
  CHECK(doubled.atoms()[1].point(0) == 2.0);
  CHECK(doubled.atoms()[0].mass == 0.5);
  const AtomicLaw asym(1, {Atom{vec1(-1.0), 0.25}, Atom{vec1(2.0), 0.75}});
  const AtomicLaw reflected = scale(asym, -1.0);
  CHECK(reflected.atoms()[0].point(0) == -2.0);
  CHECK(reflected.atoms()[0].mass == 0.75);
  CHECK_THROWS_AS(scale(rad, 0.0), std::invalid_argument);
}

TEST_CASE("atomic law validation") {
  CHECK_THROWS_AS(AtomicLaw(1, {Atom{vec1(0.0), 0.5}}), std::invalid_argument);
  CHECK_THROWS_AS(AtomicLaw(1, {Atom{vec1(0.0), 0.5}, Atom{vec1(0.0), 0.5}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(AtomicLaw(1, {Atom{vec1(0.0), 1.5}, Atom{vec1(1.0), -0.5}}),
                  std::invalid_argument);

  // Lattice supports collapse below the guard after merging.
  const auto lattice_law = [](int n, double spacing) {
    std::vector<Atom> atoms;
    for (int i = 0; i < n; ++i) atoms.push_back(Atom{vec1(i * spacing), 1.0 / n});
    double fix = 0.0;
    for (int i = 0; i + 1 < n; ++i) fix += atoms[i].mass;
    atoms.back().mass = 1.0 - fix;
    return AtomicLaw(1, std::move(atoms));
  };
  const AtomicLaw lattice = lattice_law(1100, 1.0);
  CHECK(convolve(lattice, lattice).size() == 2199);

  // Post-merge guard: two incommensurate supports keep all pair sums
  // distinct, 1100^2 > 1e6.
  const AtomicLaw irr_a = lattice_law(1100, 1.0 / 1100.0);
  const AtomicLaw irr_b = lattice_law(1100, 3.14159265358979 / 1100.0);
  CHECK_THROWS_AS(convolve(irr_a, irr_b), std::length_error);

  // Intermediate memory cap fires before any allocation.
  const AtomicLaw huge_a = lattice_law(3000, 1.0);
  CHECK_THROWS_AS(convolve(huge_a, huge_a), std::length_error);
}

TEST_CASE("exact_mu_atomic reference values") {
  const AtomicLaw rad = AtomicLaw::rademacher();
  CHECK(exact_mu_atomic(rad, rad) == 0.0);
  CHECK(exact_mu_atomic(rad, AtomicLaw::dirac(vec1(0.0))) == doctest::Approx(0.5).epsilon(1e-15));

  // Product of two Rademacher coordinates vs a point mass at the origin.
  const AtomicLaw rad2 = product_law(rad, rad);
  CHECK(exact_mu_atomic(rad2, AtomicLaw::dirac(vec2(0.0, 0.0))) ==
        doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("exact_mu_atomic agrees with the unpruned brute force") {
  SequentialRng rng(PhiloxStream(101, 0));
  for (int trial = 0; trial < 100; ++trial) {
    const int p = 1 + static_cast<int>(trial % 3);
    const AtomicLaw a = random_law(rng, p, 5);
    const AtomicLaw b = random_law(rng, p, 5);
    const double fast = exact_mu_atomic(a, b);
    const double slow = brute_force_mu(a, b);
    CHECK(std::fabs(fast - slow) <= 1e-12);
  }
}

TEST_CASE("metric axioms on randomized laws") {
  SequentialRng rng(PhiloxStream(102, 0));
  for (int trial = 0; trial < 40; ++trial) {
    const int p = 1 + static_cast<int>(trial % 2);
    const AtomicLaw a = random_law(rng, p, 4);
    const AtomicLaw b = random_law(rng, p, 4);
    const AtomicLaw c = random_law(rng, p, 4);

    CHECK(exact_mu_atomic(a, b) == exact_mu_atomic(b, a));
    CHECK(exact_mu_atomic(a, c) <= exact_mu_atomic(a, b) + exact_mu_atomic(b, c) + 1e-12);
    CHECK(exact_mu_atomic(a, b) > 0.0);  // distinct random laws

    for (const double t : {0.5, 2.0, 7.0}) {
      CHECK(std::fabs(exact_mu_atomic(scale(a, t), scale(b, t)) - exact_mu_atomic(a, b)) <=
            1e-12);
    }

    // Regularity under a common convolution.
    CHECK(exact_mu_atomic(convolve(a, c), convolve(b, c)) <= exact_mu_atomic(a, b) + 1e-12);
  }
}

TEST_CASE("exact pseudo-moments") {
  const AtomicLaw rad = AtomicLaw::rademacher();
  CHECK(exact_pseudo_moment(rad, rad, 3) == 0.0);
  CHECK(exact_pseudo_moment(AtomicLaw::dirac(vec1(1.0)), AtomicLaw::dirac(vec1(2.0)), 3) ==
        doctest::Approx(9.0).epsilon(1e-15));

  // Disjoint supports: the sum of the two absolute moments.
  const AtomicLaw a(1, {Atom{vec1(-3.0), 0.5}, Atom{vec1(0.5), 0.5}});
  const AtomicLaw b(1, {Atom{vec1(-1.0), 0.25}, Atom{vec1(2.0), 0.75}});
  CHECK(exact_pseudo_moment(a, b, 1) ==
        doctest::Approx(a.abs_moment(1) + b.abs_moment(1)).epsilon(1e-14));

  // Homogeneity of order 3.
  SequentialRng rng(PhiloxStream(103, 0));
  for (int trial = 0; trial < 20; ++trial) {
    const AtomicLaw u = random_law(rng, 2, 4);
    const AtomicLaw v = random_law(rng, 2, 4);
    for (const double c : {0.5, 2.0, -3.0}) {
      const double lhs = exact_pseudo_moment(scale(u, c), scale(v, c), 3);
      const double rhs = std::pow(std::fabs(c), 3) * exact_pseudo_moment(u, v, 3);
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
  }
}

TEST_CASE("exact_mu_atomic_vs_gaussian reference values") {
  Eigen::VectorXd unit(1);
  unit << 1.0;

  const auto delta = exact_mu_atomic_vs_gaussian(AtomicLaw::dirac(vec1(0.0)),
                                                 CovarianceSpec::diagonal(unit));
  CHECK(delta.value == doctest::Approx(0.5).epsilon(1e-12));

  const auto rad = exact_mu_atomic_vs_gaussian(AtomicLaw::rademacher(),
                                               CovarianceSpec::diagonal(unit));
  // 1/2 - Phi(-1); the flavored corner scan attains the sup exactly.
  CHECK(rad.value == doctest::Approx(0.34134474606854293).epsilon(1e-9));
  CHECK(rad.gap_bound > 0.0);
  CHECK(std::fabs(rad.value - 0.3413447460685429) <= rad.gap_bound);

  // Lattice law of the normalized two-draw spike sum vs its matched
  // Gaussian: at least half of the zero-atom mass.
  const auto spike = DistributionSpec::spike(1, 2.0, Family::spike13);
  const AtomicLaw sum_law =
      scale(convolution_power(*atomic_law_of(spike), 2), 1.0 / std::sqrt(2.0));
  Eigen::VectorXd var(1);
  var << spike.spike_variance();
  const auto res = exact_mu_atomic_vs_gaussian(sum_law, CovarianceSpec::diagonal(var));
  CHECK(res.value >= 0.5 * 0.375);

  // Non-diagonal covariance is unsupported by design.
  Eigen::MatrixXd dep(2, 2);
  dep << 1.0, 0.5, 0.5, 1.0;
  CHECK_THROWS_AS(
      exact_mu_atomic_vs_gaussian(product_law(AtomicLaw::rademacher(), AtomicLaw::rademacher()),
                                  CovarianceSpec(dep)),
      std::invalid_argument);
}

TEST_CASE("exact_mu_atomic_vs_gaussian in p = 2 agrees with a dense scan") {
  const AtomicLaw rad2 = product_law(AtomicLaw::rademacher(), AtomicLaw::rademacher());
  Eigen::VectorXd var(2);
  var << 1.0, 1.0;
  const auto res = exact_mu_atomic_vs_gaussian(rad2, CovarianceSpec::diagonal(var));

  double dense_best = 0.0;
  for (int i = 0; i <= 400; ++i) {
    for (int k = 0; k <= 400; ++k) {
      const double r1 = -4.0 + 8.0 * i / 400.0;
      const double r2 = -4.0 + 8.0 * k / 400.0;
      double f = 0.0;
      for (const auto& atom : rad2.atoms()) {
        if (atom.point(0) <= r1 && atom.point(1) <= r2) f += atom.mass;
      }
      dense_best = std::max(dense_best, std::fabs(f - normal_cdf(r1) * normal_cdf(r2)));
    }
  }
  CHECK(res.value >= dense_best - 1e-9);
  CHECK(res.value <= dense_best + res.gap_bound + 0.02);
}

TEST_CASE("exact_mu_atomic_vs_gaussian agrees with a dense-grid scan") {
  // 1-d sanity: dense grid of 200k corners cannot beat the flavored scan
  // by more than a hair.
  const AtomicLaw law(1, {Atom{vec1(-1.3), 0.3}, Atom{vec1(0.2), 0.45}, Atom{vec1(1.7), 0.25}});
  Eigen::VectorXd var(1);
  var << 0.8;
  const auto res = exact_mu_atomic_vs_gaussian(law, CovarianceSpec::diagonal(var));
  const double sigma = std::sqrt(0.8);
  double dense_best = 0.0;
  for (int i = 0; i <= 200000; ++i) {
    const double r = -6.0 + 12.0 * i / 200000.0;
    double f = 0.0;
    for (const auto& atom : law.atoms()) {
      if (atom.point(0) <= r) f += atom.mass;
    }
    dense_best = std::max(dense_best, std::fabs(f - normal_cdf(r / sigma)));
  }
  CHECK(res.value >= dense_best - 1e-9);
  CHECK(res.value <= dense_best + res.gap_bound + 1e-9);
}

TEST_CASE("pseudo_moment_vs_gaussian closed forms") {
  const auto rad_spec = DistributionSpec::product({CoordinateLaw::rademacher});
  const auto order3 = pseudo_moment_vs_gaussian(rad_spec, 3, 1000, 1, 0);
  CHECK(order3.value == doctest::Approx(2.5957691216057306).epsilon(1e-12));
  CHECK(order3.std_error == 0.0);

  const auto spike = DistributionSpec::spike(1, 4.0, Family::spike13);
  const auto order1 = pseudo_moment_vs_gaussian(spike, 1, 1000, 1, 0);
  // Atom term gamma^{-2/3} plus the exact folded-Gaussian mean.
  CHECK(order1.value == doctest::Approx(1.0301316585758764).epsilon(1e-12));

  CHECK_THROWS_AS(
      pseudo_moment_vs_gaussian(DistributionSpec::gaussian(CovarianceSpec::identity(1)), 3,
                                100, 1, 0),
      std::invalid_argument);
}

TEST_CASE("sample_atoms reproduces the masses") {
  const AtomicLaw law(1, {Atom{vec1(-2.0), 0.2}, Atom{vec1(0.0), 0.5}, Atom{vec1(3.0), 0.3}});
  const SampleBatch batch = sample_atoms(law, 200000, 41, 0);
  CHECK(sample_atoms(law, 64, 41, 0).data == sample_atoms(law, 64, 41, 0).data);
  std::int64_t zeros = 0;
  for (std::int64_t i = 0; i < batch.rows(); ++i) {
    if (batch.data(i, 0) == 0.0) ++zeros;
  }
  const double freq = static_cast<double>(zeros) / static_cast<double>(batch.rows());
  CHECK(std::fabs(freq - 0.5) <= 3.0 * std::sqrt(0.25 / static_cast<double>(batch.rows())));
}

TEST_CASE("atomic_law_of covers the finite families") {
  const auto spike = DistributionSpec::spike(1, 4.0, Family::spike13);
  REQUIRE(atomic_law_of(spike).has_value());
  CHECK(atomic_law_of(spike)->size() == 3);
  CHECK(atomic_law_of(spike)->abs_moment(1) ==
        doctest::Approx(std::pow(4.0, -2.0 / 3.0)).epsilon(1e-12));

  const auto rad2 = DistributionSpec::product(
      {CoordinateLaw::rademacher, CoordinateLaw::rademacher});
  REQUIRE(atomic_law_of(rad2).has_value());
  CHECK(atomic_law_of(rad2)->size() == 4);

  CHECK(!atomic_law_of(DistributionSpec::spike(2, 4.0, Family::spike13)).has_value());
  CHECK(!atomic_law_of(DistributionSpec::multiplier(2)).has_value());
}
