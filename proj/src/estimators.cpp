#include "hdclt/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "hdclt/normal.hpp"
#include "hdclt/oracle.hpp"
#include "hdclt/rng.hpp"

namespace hdclt {

namespace {

constexpr double kZ975 = 1.959963984540054;
constexpr std::uint64_t kBootstrapSalt = 0x626F6F74u;  // "boot"

double clamp01(double x) { return std::min(std::max(x, 0.0), 1.0); }

// --- bootstrap plumbing ------------------------------------------------

// Each batch carries its own resampling stream derived from its identity,
// so mu_hat(u, v) and mu_hat(v, u) consume identical randomness per batch
// and agree bit for bit.
PhiloxStream bootstrap_stream(const SampleBatch& batch) {
  return PhiloxStream(mix64(batch.seed, kBootstrapSalt), batch.stream_id);
}

struct BootstrapSummary {
  double std_error;
  double ci_low;
  double ci_high;
};

BootstrapSummary summarize_bootstrap(std::vector<double> stats) {
  const std::size_t b = stats.size();
  double mean = 0.0;
  for (double s : stats) mean += s;
  mean /= static_cast<double>(b);
  double var = 0.0;
  for (double s : stats) var += (s - mean) * (s - mean);
  var /= static_cast<double>(b - 1);
  std::sort(stats.begin(), stats.end());
  const auto at = [&](double q) {
    const double pos = q * static_cast<double>(b - 1);
    return stats[static_cast<std::size_t>(pos + 0.5)];
  };
  return BootstrapSummary{std::sqrt(var), at(0.025), at(0.975)};
}

// Conservative fallback: per-corner Hoeffding with a union over corners
// (plain DKW in p = 1), one half of alpha = 0.05 per sample.
double dkw_union_halfwidth(std::int64_t rows, std::size_t corners) {
  const double c_eff = std::max<double>(2.0, static_cast<double>(corners));
  return std::sqrt(std::log(2.0 * c_eff / 0.025) / (2.0 * static_cast<double>(rows)));
}

// --- distinct-row compression ------------------------------------------

// Lexicographic dedup of the rows of a batch; the sup statistic only sees
// rows through their values, so bootstrap counting can run over distinct
// rows (atomic laws collapse to a handful).
struct DistinctRows {
  Eigen::MatrixXd points;          // D x p
  std::vector<std::int64_t> count; // multiplicity per distinct row
  std::vector<std::int32_t> row_to_distinct;
};

DistinctRows distinct_rows(const Eigen::MatrixXd& data) {
  const std::int64_t r = data.rows();
  const int p = static_cast<int>(data.cols());
  std::vector<std::int64_t> order(r);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
    for (int j = 0; j < p; ++j) {
      if (data(a, j) < data(b, j)) return true;
      if (data(a, j) > data(b, j)) return false;
    }
    return false;
  });
  DistinctRows out;
  out.row_to_distinct.assign(r, 0);
  std::vector<std::int64_t> reps;
  for (std::int64_t i = 0; i < r; ++i) {
    const std::int64_t row = order[i];
    const bool fresh = reps.empty() || data.row(row) != data.row(reps.back());
    if (fresh) {
      reps.push_back(row);
      out.count.push_back(0);
    }
    out.row_to_distinct[row] = static_cast<std::int32_t>(reps.size() - 1);
    ++out.count.back();
  }
  out.points.resize(static_cast<std::int64_t>(reps.size()), p);
  for (std::size_t d = 0; d < reps.size(); ++d) out.points.row(d) = data.row(reps[d]);
  return out;
}

// --- tensor-grid evaluator ----------------------------------------------

// ECDF evaluation over a tensor grid of per-axis cuts: bin every row once,
// then a multidimensional prefix sum turns cell counts into rectangle
// counts. Bootstrap resamples only touch the per-row cell indices.
struct TensorEvaluator {
  std::vector<std::vector<double>> cuts;  // last cut per axis is +inf
  std::vector<std::size_t> stride;
  std::size_t cells = 1;
  std::vector<std::int32_t> cell_of_u, cell_of_v;
  std::int64_t rows_u = 0, rows_v = 0;

  void bin(const Eigen::MatrixXd& data, std::vector<std::int32_t>& cell_of) const {
    const std::int64_t r = data.rows();
    const int p = static_cast<int>(data.cols());
    cell_of.assign(r, 0);
    for (std::int64_t i = 0; i < r; ++i) {
      std::size_t cell = 0;
      for (int j = 0; j < p; ++j) {
        const auto& c = cuts[j];
        const std::size_t idx =
            std::lower_bound(c.begin(), c.end(), data(i, j)) - c.begin();
        cell += idx * stride[j];
      }
      cell_of[i] = static_cast<std::int32_t>(cell);
    }
  }

  void prefix_sum(std::vector<std::int64_t>& h) const {
    for (std::size_t j = 0; j < cuts.size(); ++j) {
      const std::size_t s = stride[j];
      const std::size_t n = cuts[j].size();
      const std::size_t block = s * n;
      for (std::size_t base = 0; base < cells; base += block) {
        for (std::size_t lvl = 1; lvl < n; ++lvl) {
          const std::size_t off = base + lvl * s;
          for (std::size_t i = 0; i < s; ++i) h[off + i] += h[off + i - s];
        }
      }
    }
  }

  double sup(const std::vector<std::int32_t>& cu, const std::vector<std::int32_t>& cv,
             std::vector<std::int64_t>& hu, std::vector<std::int64_t>& hv,
             std::int64_t ru, std::int64_t rv) const {
    std::fill(hu.begin(), hu.end(), 0);
    std::fill(hv.begin(), hv.end(), 0);
    for (const std::int32_t c : cu) ++hu[static_cast<std::size_t>(c)];
    for (const std::int32_t c : cv) ++hv[static_cast<std::size_t>(c)];
    prefix_sum(hu);
    prefix_sum(hv);
    double best = 0.0;
    const double iu = 1.0 / static_cast<double>(ru);
    const double iv = 1.0 / static_cast<double>(rv);
    for (std::size_t i = 0; i < cells; ++i) {
      best = std::max(best,
                      std::fabs(static_cast<double>(hu[i]) * iu -
                                static_cast<double>(hv[i]) * iv));
    }
    return best;
  }
};

// Marginal Kolmogorov distance between two sorted columns.
double marginal_ks(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double ia = 1.0 / static_cast<double>(a.size());
  const double ib = 1.0 / static_cast<double>(b.size());
  std::size_t i = 0, k = 0;
  double best = 0.0;
  while (i < a.size() && k < b.size()) {
    if (a[i] <= b[k]) ++i; else ++k;
    best = std::max(best, std::fabs(static_cast<double>(i) * ia -
                                    static_cast<double>(k) * ib));
  }
  return best;
}

// Pooled distinct values per axis (+inf appended). The tensor of these is
// the pooled corner family used when the data has few distinct values per
// axis: for atomic laws it provably contains the ECDF-sup maximizer,
// which plain sample-point corners can miss in p >= 2.
std::optional<std::vector<std::vector<double>>> pooled_axis_cuts(
    const SampleBatch& u, const SampleBatch& v, double max_cells) {
  const int p = u.dim();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> cuts(p);
  double cells = 1.0;
  for (int j = 0; j < p; ++j) {
    std::vector<double> pooled;
    pooled.reserve(u.rows() + v.rows());
    for (std::int64_t i = 0; i < u.rows(); ++i) pooled.push_back(u.data(i, j));
    for (std::int64_t i = 0; i < v.rows(); ++i) pooled.push_back(v.data(i, j));
    std::sort(pooled.begin(), pooled.end());
    pooled.erase(std::unique(pooled.begin(), pooled.end()), pooled.end());
    pooled.push_back(inf);
    cells *= static_cast<double>(pooled.size());
    if (cells > max_cells) return std::nullopt;
    cuts[j] = std::move(pooled);
  }
  return cuts;
}

std::vector<std::vector<double>> quantile_axis_cuts(const SampleBatch& u,
                                                    const SampleBatch& v, int k) {
  const int p = u.dim();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> cuts(p);
  // Active axes: as many as the corner guard allows, preferring the axes
  // with the largest marginal discrepancy; dropped axes stay unconstrained.
  int max_axes = std::min(p, RectangleFamily::kAxisCap);
  while (max_axes > 1 &&
         std::pow(static_cast<double>(k + 1), max_axes) >
             static_cast<double>(RectangleFamily::kMaxCorners)) {
    --max_axes;
  }
  std::vector<int> axes(p);
  std::iota(axes.begin(), axes.end(), 0);
  if (max_axes < p) {
    std::vector<double> ks(p);
    for (int j = 0; j < p; ++j) {
      std::vector<double> cu(u.rows()), cv(v.rows());
      for (std::int64_t i = 0; i < u.rows(); ++i) cu[i] = u.data(i, j);
      for (std::int64_t i = 0; i < v.rows(); ++i) cv[i] = v.data(i, j);
      ks[j] = marginal_ks(std::move(cu), std::move(cv));
    }
    std::stable_sort(axes.begin(), axes.end(),
                     [&](int a, int b) { return ks[a] > ks[b]; });
    axes.resize(max_axes);
    std::sort(axes.begin(), axes.end());
  }
  std::vector<bool> active(p, false);
  for (int j : axes) active[j] = true;

  for (int j = 0; j < p; ++j) {
    auto& c = cuts[j];
    if (active[j]) {
      std::vector<double> pooled;
      pooled.reserve(u.rows() + v.rows());
      for (std::int64_t i = 0; i < u.rows(); ++i) pooled.push_back(u.data(i, j));
      for (std::int64_t i = 0; i < v.rows(); ++i) pooled.push_back(v.data(i, j));
      std::sort(pooled.begin(), pooled.end());
      for (int i = 1; i <= k; ++i) {
        const std::size_t pos = static_cast<std::size_t>(
            static_cast<double>(i) * static_cast<double>(pooled.size()) /
            static_cast<double>(k + 1));
        c.push_back(pooled[std::min(pos, pooled.size() - 1)]);
      }
      std::sort(c.begin(), c.end());
      c.erase(std::unique(c.begin(), c.end()), c.end());
    }
    c.push_back(inf);
  }
  return cuts;
}

TensorEvaluator make_tensor_evaluator(const SampleBatch& u, const SampleBatch& v,
                                      std::vector<std::vector<double>> cuts) {
  const int p = u.dim();
  TensorEvaluator ev;
  ev.cuts = std::move(cuts);
  ev.rows_u = u.rows();
  ev.rows_v = v.rows();
  ev.stride.assign(p, 1);
  ev.cells = 1;
  for (int j = 0; j < p; ++j) {
    ev.stride[j] = ev.cells;
    ev.cells *= ev.cuts[j].size();
    if (ev.cells > RectangleFamily::kMaxCorners * 4) {
      throw std::length_error("mu_hat: tensor grid exceeds guard");
    }
  }
  ev.bin(u.data, ev.cell_of_u);
  ev.bin(v.data, ev.cell_of_v);
  return ev;
}

// Tensor cuts for a strategy, when the strategy is tensor-shaped:
// quantile grids always, pooled corners when the per-axis distinct values
// stay small (p == 1 uses every pooled value, the exact family).
std::optional<std::vector<std::vector<double>>> tensor_cuts_for(
    const SampleBatch& u, const SampleBatch& v, const RectangleFamily& rects) {
  if (rects.strategy() == CornerStrategy::quantile_grid) {
    return quantile_axis_cuts(u, v, rects.k_per_axis());
  }
  if (rects.strategy() == CornerStrategy::pooled_corners) {
    const double cap = u.dim() == 1
                           ? static_cast<double>(RectangleFamily::kMaxCorners)
                           : 200000.0;
    auto cuts = pooled_axis_cuts(u, v, cap);
    if (!cuts && u.dim() == 1) {
      throw std::length_error("mu_hat: pooled corner family exceeds guard");
    }
    return cuts;
  }
  return std::nullopt;
}

// --- point-corner evaluator ---------------------------------------------

struct PointEvaluator {
  Eigen::MatrixXd corners;  // C x p, canonical (lexicographic) order
  DistinctRows du, dv;
  // membership[d * C + c] = 1 iff distinct point d <= corner c
  std::vector<std::uint8_t> member_u, member_v;
  std::int64_t rows_u = 0, rows_v = 0;

  double sup(const std::vector<std::int64_t>& count_u,
             const std::vector<std::int64_t>& count_v) const {
    const std::size_t c_n = static_cast<std::size_t>(corners.rows());
    std::vector<double> fu(c_n, 0.0), fv(c_n, 0.0);
    for (std::size_t d = 0; d < count_u.size(); ++d) {
      const double w = static_cast<double>(count_u[d]) / static_cast<double>(rows_u);
      if (count_u[d] == 0) continue;
      const std::uint8_t* m = &member_u[d * c_n];
      for (std::size_t c = 0; c < c_n; ++c) fu[c] += m[c] ? w : 0.0;
    }
    for (std::size_t d = 0; d < count_v.size(); ++d) {
      const double w = static_cast<double>(count_v[d]) / static_cast<double>(rows_v);
      if (count_v[d] == 0) continue;
      const std::uint8_t* m = &member_v[d * c_n];
      for (std::size_t c = 0; c < c_n; ++c) fv[c] += m[c] ? w : 0.0;
    }
    double best = 0.0;
    for (std::size_t c = 0; c < c_n; ++c) best = std::max(best, std::fabs(fu[c] - fv[c]));
    return best;
  }
};

std::vector<std::uint8_t> membership(const Eigen::MatrixXd& points,
                                     const Eigen::MatrixXd& corners) {
  const std::int64_t d_n = points.rows();
  const std::int64_t c_n = corners.rows();
  const int p = static_cast<int>(points.cols());
  std::vector<std::uint8_t> m(static_cast<std::size_t>(d_n * c_n), 0);
  for (std::int64_t d = 0; d < d_n; ++d) {
    for (std::int64_t c = 0; c < c_n; ++c) {
      bool in = true;
      for (int j = 0; j < p; ++j) {
        if (points(d, j) > corners(c, j)) { in = false; break; }
      }
      m[static_cast<std::size_t>(d * c_n + c)] = in ? 1 : 0;
    }
  }
  return m;
}

Eigen::MatrixXd dedup_corner_matrix(std::vector<Eigen::VectorXd> corners, int p) {
  std::sort(corners.begin(), corners.end(),
            [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
              for (int j = 0; j < a.size(); ++j) {
                if (a(j) < b(j)) return true;
                if (a(j) > b(j)) return false;
              }
              return false;
            });
  corners.erase(std::unique(corners.begin(), corners.end(),
                            [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
                              return a == b;
                            }),
                corners.end());
  Eigen::MatrixXd m(static_cast<std::int64_t>(corners.size()), p);
  for (std::size_t i = 0; i < corners.size(); ++i) m.row(static_cast<std::int64_t>(i)) = corners[i];
  return m;
}

PointEvaluator make_point_evaluator(const SampleBatch& u, const SampleBatch& v,
                                    const RectangleFamily& rects) {
  const int p = u.dim();
  PointEvaluator ev;
  ev.rows_u = u.rows();
  ev.rows_v = v.rows();
  ev.du = distinct_rows(u.data);
  ev.dv = distinct_rows(v.data);

  std::vector<Eigen::VectorXd> corners;
  if (rects.strategy() == CornerStrategy::fixed) {
    for (const auto& c : rects.fixed_corners()) {
      if (c.size() != p) throw std::invalid_argument("mu_hat: corner dimension mismatch");
      corners.push_back(c);
    }
  } else {
    corners.reserve(ev.du.points.rows() + ev.dv.points.rows());
    for (std::int64_t i = 0; i < ev.du.points.rows(); ++i) corners.push_back(ev.du.points.row(i));
    for (std::int64_t i = 0; i < ev.dv.points.rows(); ++i) corners.push_back(ev.dv.points.row(i));
  }
  if (corners.empty()) throw std::invalid_argument("mu_hat: empty rectangle family");
  if (corners.size() > RectangleFamily::kMaxCorners) {
    throw std::length_error("mu_hat: corner family exceeds guard");
  }
  ev.corners = dedup_corner_matrix(std::move(corners), p);

  const double work =
      static_cast<double>(ev.du.points.rows() + ev.dv.points.rows()) *
      static_cast<double>(ev.corners.rows());
  if (work > 2e8) {
    throw std::length_error(
        "mu_hat: pooled corners over mostly-distinct rows is quadratic here; "
        "use the quantile_grid strategy");
  }
  ev.member_u = membership(ev.du.points, ev.corners);
  ev.member_v = membership(ev.dv.points, ev.corners);
  return ev;
}

// Multinomial row resample, accumulated as counts per distinct row.
void resample_counts(SequentialRng& rng, const std::vector<std::int32_t>& row_to_distinct,
                     std::vector<std::int64_t>& counts) {
  std::fill(counts.begin(), counts.end(), 0);
  const std::uint32_t r = static_cast<std::uint32_t>(row_to_distinct.size());
  for (std::uint32_t i = 0; i < r; ++i) {
    ++counts[row_to_distinct[rng.next_index(r)]];
  }
}

}  // namespace

RectangleFamily RectangleFamily::pooled_corners() { return RectangleFamily{}; }

RectangleFamily RectangleFamily::quantile_grid(int k_per_axis) {
  if (k_per_axis < 1) throw std::invalid_argument("quantile_grid: k must be >= 1");
  RectangleFamily f;
  f.strategy_ = CornerStrategy::quantile_grid;
  f.k_ = k_per_axis;
  return f;
}

RectangleFamily RectangleFamily::fixed(std::vector<Eigen::VectorXd> corners) {
  if (corners.empty()) throw std::invalid_argument("fixed rectangle family is empty");
  RectangleFamily f;
  f.strategy_ = CornerStrategy::fixed;
  f.fixed_ = std::move(corners);
  return f;
}

namespace {

EstimateWithCI bootstrap_or_dkw(double value, const SampleBatch& u, const SampleBatch& v,
                                std::size_t corners, const EstimatorOptions& opts,
                                const std::function<double(std::int64_t)>& boot_rep) {
  EstimateWithCI est;
  est.value = value;
  est.method = EstimateMethod::empirical_sup;
  est.replications = u.rows() + v.rows();
  if (opts.uncertainty == Uncertainty::dkw_union) {
    const double hw = dkw_union_halfwidth(u.rows(), corners) +
                      dkw_union_halfwidth(v.rows(), corners);
    est.std_error = hw / kZ975;
    est.ci_low = clamp01(value - hw);
    est.ci_high = clamp01(value + hw);
    est.clip_ci_to_value();
    return est;
  }
  const int b = opts.bootstrap_resamples;
  if (b < 2) throw std::invalid_argument("bootstrap needs at least 2 resamples");
  std::vector<double> stats(b);
  for (int rep = 0; rep < b; ++rep) stats[rep] = boot_rep(rep);
  const auto s = summarize_bootstrap(std::move(stats));
  est.std_error = s.std_error;
  est.ci_low = clamp01(s.ci_low);
  est.ci_high = clamp01(s.ci_high);
  est.clip_ci_to_value();
  return est;
}

}  // namespace

EstimateWithCI mu_hat(const SampleBatch& u, const SampleBatch& v,
                      const RectangleFamily& rects, const EstimatorOptions& opts) {
  if (u.dim() != v.dim()) throw std::invalid_argument("mu_hat: dimension mismatch");
  if (u.rows() < 1000 || v.rows() < 1000) {
    throw std::invalid_argument("mu_hat: needs at least 1000 rows per batch");
  }

  const PhiloxStream boot_u = bootstrap_stream(u);
  const PhiloxStream boot_v = bootstrap_stream(v);
  const std::uint64_t ru = static_cast<std::uint64_t>(u.rows());
  const std::uint64_t rv = static_cast<std::uint64_t>(v.rows());

  if (auto cuts = tensor_cuts_for(u, v, rects)) {
    TensorEvaluator ev = make_tensor_evaluator(u, v, std::move(*cuts));
    std::vector<std::int64_t> hu(ev.cells), hv(ev.cells);
    const double value = ev.sup(ev.cell_of_u, ev.cell_of_v, hu, hv, ev.rows_u, ev.rows_v);
    std::vector<std::int32_t> cu(u.rows()), cv(v.rows());
    return bootstrap_or_dkw(
        value, u, v, ev.cells, opts, [&](std::int64_t rep) {
          SequentialRng gu(boot_u, static_cast<std::uint64_t>(rep) * ru);
          SequentialRng gv(boot_v, static_cast<std::uint64_t>(rep) * rv);
          for (std::uint64_t i = 0; i < ru; ++i) {
            cu[i] = ev.cell_of_u[gu.next_index(static_cast<std::uint32_t>(ru))];
          }
          for (std::uint64_t i = 0; i < rv; ++i) {
            cv[i] = ev.cell_of_v[gv.next_index(static_cast<std::uint32_t>(rv))];
          }
          return ev.sup(cu, cv, hu, hv, ev.rows_u, ev.rows_v);
        });
  }

  PointEvaluator ev = make_point_evaluator(u, v, rects);
  std::vector<std::int64_t> base_u(ev.du.count), base_v(ev.dv.count);
  const double value = ev.sup(base_u, base_v);
  std::vector<std::int64_t> wu(ev.du.count.size()), wv(ev.dv.count.size());
  return bootstrap_or_dkw(
      value, u, v, static_cast<std::size_t>(ev.corners.rows()), opts,
      [&](std::int64_t rep) {
        SequentialRng gu(boot_u, static_cast<std::uint64_t>(rep) * ru);
        SequentialRng gv(boot_v, static_cast<std::uint64_t>(rep) * rv);
        resample_counts(gu, ev.du.row_to_distinct, wu);
        resample_counts(gv, ev.dv.row_to_distinct, wv);
        return ev.sup(wu, wv);
      });
}

namespace {

// Explicit corner list for the smooth estimators (phi_eps must be
// evaluated per row x corner, so the family has to stay small).
std::vector<Eigen::VectorXd> materialize_corner_list(const SampleBatch& u,
                                                     const SampleBatch& v,
                                                     const RectangleFamily& rects,
                                                     std::size_t max_corners) {
  const int p = u.dim();
  std::vector<Eigen::VectorXd> corners;
  const auto expand_tensor = [&](const std::vector<std::vector<double>>& cuts) {
    // Expand the tensor product of cuts (+inf coordinates are harmless:
    // that factor of phi is 1).
    std::size_t total = 1;
    for (const auto& c : cuts) total *= c.size();
    if (total > max_corners) {
      throw std::length_error("smoothed estimator: tensor corner list exceeds guard");
    }
    std::vector<std::size_t> idx(p, 0);
    while (true) {
      Eigen::VectorXd corner(p);
      for (int j = 0; j < p; ++j) corner(j) = cuts[j][idx[j]];
      corners.push_back(std::move(corner));
      int j = 0;
      while (j < p) {
        if (++idx[j] < cuts[j].size()) break;
        idx[j] = 0;
        ++j;
      }
      if (j == p) break;
    }
  };
  if (rects.strategy() == CornerStrategy::fixed) {
    corners = rects.fixed_corners();
  } else if (rects.strategy() == CornerStrategy::pooled_corners) {
    const auto cuts = pooled_axis_cuts(u, v, static_cast<double>(max_corners));
    if (cuts) {
      expand_tensor(*cuts);
    } else {
      const DistinctRows du = distinct_rows(u.data);
      const DistinctRows dv = distinct_rows(v.data);
      for (std::int64_t i = 0; i < du.points.rows(); ++i) corners.push_back(du.points.row(i));
      for (std::int64_t i = 0; i < dv.points.rows(); ++i) corners.push_back(dv.points.row(i));
    }
  } else {
    expand_tensor(quantile_axis_cuts(u, v, rects.k_per_axis()));
  }
  if (corners.empty()) throw std::invalid_argument("empty rectangle family");
  if (corners.size() > max_corners) {
    throw std::length_error("smoothed estimator: corner family exceeds guard");
  }
  const Eigen::MatrixXd dedup = dedup_corner_matrix(std::move(corners), p);
  std::vector<Eigen::VectorXd> out(static_cast<std::size_t>(dedup.rows()));
  for (std::int64_t i = 0; i < dedup.rows(); ++i) out[static_cast<std::size_t>(i)] = dedup.row(i);
  return out;
}

// Mean-of-columns sup statistic shared by the smooth estimators: given
// per-row function values M (rows x functions), the statistic is
// max_f |mean_u M_u[., f] - mean_v M_v[., f]|.
EstimateWithCI column_mean_sup(const Eigen::MatrixXd& mu_vals, const Eigen::MatrixXd& mv_vals,
                               const SampleBatch& u, const SampleBatch& v,
                               const EstimatorOptions& opts, EstimateMethod method) {
  const std::int64_t ru = mu_vals.rows(), rv = mv_vals.rows();
  const std::int64_t f_n = mu_vals.cols();
  const Eigen::VectorXd mean_u = mu_vals.colwise().mean();
  const Eigen::VectorXd mean_v = mv_vals.colwise().mean();
  const double value = (mean_u - mean_v).cwiseAbs().maxCoeff();

  EstimateWithCI est;
  est.value = value;
  est.method = method;
  est.replications = ru + rv;
  if (opts.uncertainty == Uncertainty::dkw_union) {
    const double hw = dkw_union_halfwidth(ru, static_cast<std::size_t>(f_n)) +
                      dkw_union_halfwidth(rv, static_cast<std::size_t>(f_n));
    est.std_error = hw / kZ975;
    est.ci_low = value - hw;
    est.ci_high = value + hw;
    est.clip_ci_to_value();
    return est;
  }
  const int b = opts.bootstrap_resamples;
  if (b < 2) throw std::invalid_argument("bootstrap needs at least 2 resamples");
  const PhiloxStream boot_u = bootstrap_stream(u);
  const PhiloxStream boot_v = bootstrap_stream(v);
  std::vector<double> stats(b);
  Eigen::VectorXd su(f_n), sv(f_n);
  for (int rep = 0; rep < b; ++rep) {
    SequentialRng gu(boot_u, static_cast<std::uint64_t>(rep) * ru);
    SequentialRng gv(boot_v, static_cast<std::uint64_t>(rep) * rv);
    su.setZero();
    sv.setZero();
    for (std::int64_t i = 0; i < ru; ++i) {
      su += mu_vals.row(gu.next_index(static_cast<std::uint32_t>(ru)));
    }
    for (std::int64_t i = 0; i < rv; ++i) {
      sv += mv_vals.row(gv.next_index(static_cast<std::uint32_t>(rv)));
    }
    stats[rep] = (su / static_cast<double>(ru) - sv / static_cast<double>(rv))
                     .cwiseAbs()
                     .maxCoeff();
  }
  const auto s = summarize_bootstrap(std::move(stats));
  est.std_error = s.std_error;
  est.ci_low = s.ci_low;
  est.ci_high = s.ci_high;
  est.clip_ci_to_value();
  return est;
}

}  // namespace

EstimateWithCI smoothed_mu_hat(const SampleBatch& u, const SampleBatch& v, double eps,
                               const RectangleFamily& rects, const EstimatorOptions& opts) {
  if (u.dim() != v.dim()) throw std::invalid_argument("smoothed_mu_hat: dimension mismatch");
  if (!(eps > 0.0)) throw std::invalid_argument("smoothed_mu_hat: eps must be > 0");
  const auto corners = materialize_corner_list(u, v, rects, 8192);
  const double budget = 5e7;
  if (static_cast<double>(corners.size()) * static_cast<double>(u.rows() + v.rows()) > budget) {
    throw std::length_error("smoothed_mu_hat: rows x corners exceeds guard");
  }
  const int p = u.dim();
  const auto fill = [&](const Eigen::MatrixXd& data, Eigen::MatrixXd& m) {
    m.resize(data.rows(), static_cast<std::int64_t>(corners.size()));
    for (std::int64_t i = 0; i < data.rows(); ++i) {
      for (std::size_t c = 0; c < corners.size(); ++c) {
        double prod = 1.0;
        for (int j = 0; j < p; ++j) {
          const double rc = corners[c](j);
          if (std::isinf(rc)) continue;
          prod *= normal_cdf((rc - data(i, j)) / eps);
        }
        m(i, static_cast<std::int64_t>(c)) = prod;
      }
    }
  };
  Eigen::MatrixXd mu_vals, mv_vals;
  fill(u.data, mu_vals);
  fill(v.data, mv_vals);
  return column_mean_sup(mu_vals, mv_vals, u, v, opts, EstimateMethod::empirical_sup);
}

EstimateWithCI zeta3_lower_hat(const SampleBatch& u, const SampleBatch& v,
                               const std::vector<Eigen::VectorXd>& frequency_grid,
                               const EstimatorOptions& opts) {
  if (u.dim() != v.dim()) throw std::invalid_argument("zeta3_lower_hat: dimension mismatch");
  if (frequency_grid.empty()) throw std::invalid_argument("zeta3_lower_hat: empty grid");
  const int p = u.dim();
  for (const auto& t : frequency_grid) {
    if (t.size() != p) throw std::invalid_argument("zeta3_lower_hat: frequency dimension mismatch");
    if (t.lpNorm<1>() == 0.0) {
      throw std::invalid_argument("zeta3_lower_hat: zero frequency vector");
    }
  }
  const std::int64_t f_n = 2 * static_cast<std::int64_t>(frequency_grid.size());
  if (static_cast<double>(f_n) * static_cast<double>(u.rows() + v.rows()) > 5e7) {
    throw std::length_error("zeta3_lower_hat: rows x functions exceeds guard");
  }
  const auto fill = [&](const Eigen::MatrixXd& data, Eigen::MatrixXd& m) {
    m.resize(data.rows(), f_n);
    for (std::size_t g = 0; g < frequency_grid.size(); ++g) {
      const Eigen::VectorXd& t = frequency_grid[g];
      const double norm3 = std::pow(t.lpNorm<1>(), 3);
      for (std::int64_t i = 0; i < data.rows(); ++i) {
        const double dot = t.dot(data.row(i));
        m(i, static_cast<std::int64_t>(2 * g)) = std::sin(dot) / norm3;
        m(i, static_cast<std::int64_t>(2 * g + 1)) = std::cos(dot) / norm3;
      }
    }
  };
  Eigen::MatrixXd mu_vals, mv_vals;
  fill(u.data, mu_vals);
  fill(v.data, mv_vals);
  return column_mean_sup(mu_vals, mv_vals, u, v, opts, EstimateMethod::test_function_sup);
}

std::vector<Eigen::VectorXd> default_frequency_grid(int p, std::uint64_t seed) {
  if (p < 1) throw std::invalid_argument("default_frequency_grid: p must be >= 1");
  constexpr int kDirections = 32;
  const double magnitudes[] = {0.5, 1.0, 2.0, 4.0};
  PhiloxStream rng(mix64(seed, 0x7A657461u), 0);  // "zeta"
  std::vector<Eigen::VectorXd> grid;
  grid.reserve(kDirections * 4);
  for (int d = 0; d < kDirections; ++d) {
    Eigen::VectorXd dir(p);
    for (int j = 0; j < p; ++j) {
      dir(j) = rng.normal_at(static_cast<std::uint64_t>(d) * p + j);
    }
    dir /= dir.lpNorm<1>();
    for (const double m : magnitudes) grid.push_back(m * dir);
  }
  return grid;
}

EstimateWithCI pseudo_moment_hat(const DistributionSpec& spec_x, int order,
                                 std::int64_t replications, std::uint64_t seed,
                                 std::uint64_t stream_id) {
  if (order != 1 && order != 3) {
    throw std::invalid_argument("pseudo_moment_hat: order must be 1 or 3");
  }
  if (atomic_law_of(spec_x)) {
    // Mutually singular pair: the pseudo-moment is exactly the sum of the
    // two absolute moments.
    return pseudo_moment_vs_gaussian(spec_x, order, replications, seed, stream_id);
  }
  const auto moment = [&](const DistributionSpec& s, std::uint64_t stream, double& mean,
                          double& se) {
    const SampleBatch batch = sample(s, replications, seed, stream);
    double sum = 0.0, sum_sq = 0.0;
    for (std::int64_t i = 0; i < batch.rows(); ++i) {
      const double v = std::pow(batch.data.row(i).cwiseAbs().maxCoeff(), order);
      sum += v;
      sum_sq += v * v;
    }
    const double n = static_cast<double>(replications);
    mean = sum / n;
    se = std::sqrt(std::max(sum_sq / n - mean * mean, 0.0) / n);
  };
  double mx, sx, my, sy;
  moment(spec_x, stream_id, mx, sx);
  moment(spec_x.gaussian_match(), stream_id + 1, my, sy);

  EstimateWithCI est;
  est.method = EstimateMethod::plugin_moment;
  est.upper_surrogate = true;
  est.value = mx + my;
  est.std_error = std::sqrt(sx * sx + sy * sy);
  est.replications = replications;
  est.ci_low = est.value - kZ975 * est.std_error;
  est.ci_high = est.value + kZ975 * est.std_error;
  return est;
}

RateFit rate_fit(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw std::invalid_argument("rate_fit: needs at least 3 points");
  const std::size_t m = points.size();
  std::vector<double> x(m), y(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!(points[i].first > 0.0) || !(points[i].second > 0.0)) {
      throw std::invalid_argument("rate_fit: n and error values must be positive");
    }
    x[i] = std::log(points[i].first);
    y[i] = std::log(points[i].second);
  }
  const double xbar = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(m);
  const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(m);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (x[i] - xbar) * (x[i] - xbar);
    sxy += (x[i] - xbar) * (y[i] - ybar);
    syy += (y[i] - ybar) * (y[i] - ybar);
  }
  if (sxx == 0.0) throw std::invalid_argument("rate_fit: degenerate n grid");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = ybar - fit.slope * xbar;
  double rss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double e = y[i] - (fit.intercept + fit.slope * x[i]);
    rss += e * e;
  }
  fit.r_squared = (syy == 0.0) ? 1.0 : 1.0 - rss / syy;
  fit.slope_std_error = std::sqrt(std::max(rss, 0.0) / static_cast<double>(m - 2) / sxx);
  return fit;
}

std::string method_tag(EstimateMethod m) {
  switch (m) {
    case EstimateMethod::empirical_sup: return "empirical_sup";
    case EstimateMethod::plugin_moment: return "plugin_moment";
    case EstimateMethod::test_function_sup: return "test_function_sup";
  }
  throw std::logic_error("method_tag: unreachable");
}

}  // namespace hdclt
