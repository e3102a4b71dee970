#include "hdclt/distributions.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "hdclt/rng.hpp"

namespace hdclt {

std::string family_tag(Family f) {
  switch (f) {
    case Family::gaussian: return "gaussian";
    case Family::spike13: return "spike13";
    case Family::spike12: return "spike12";
    case Family::product: return "product";
    case Family::multiplier: return "multiplier";
  }
  throw std::logic_error("family_tag: unreachable");
}

Family family_from_tag(const std::string& tag) {
  if (tag == "gaussian") return Family::gaussian;
  if (tag == "spike13") return Family::spike13;
  if (tag == "spike12") return Family::spike12;
  if (tag == "product") return Family::product;
  if (tag == "multiplier") return Family::multiplier;
  throw std::invalid_argument("unknown distribution family tag: \"" + tag + "\"");
}

DistributionSpec DistributionSpec::gaussian(CovarianceSpec cov) {
  DistributionSpec s;
  s.family_ = Family::gaussian;
  s.dim_ = cov.dim();
  s.cov_.push_back(std::move(cov));
  return s;
}

DistributionSpec DistributionSpec::spike(int p, double gamma, Family which) {
  if (which != Family::spike13 && which != Family::spike12) {
    throw std::invalid_argument("DistributionSpec::spike: family must be spike13 or spike12");
  }
  if (p < 1) throw std::invalid_argument("spike: p must be >= 1");
  if (!(gamma > 1.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("spike: gamma must be finite and > 1");
  }
  DistributionSpec s;
  s.family_ = which;
  s.dim_ = p;
  s.gamma_ = gamma;
  return s;
}

DistributionSpec DistributionSpec::product(std::vector<CoordinateLaw> coordinates) {
  if (coordinates.empty()) {
    throw std::invalid_argument("product: needs at least one coordinate law");
  }
  DistributionSpec s;
  s.family_ = Family::product;
  s.dim_ = static_cast<int>(coordinates.size());
  s.coords_ = std::move(coordinates);
  return s;
}

DistributionSpec DistributionSpec::multiplier(int p) {
  if (p < 1) throw std::invalid_argument("multiplier: p must be >= 1");
  DistributionSpec s;
  s.family_ = Family::multiplier;
  s.dim_ = p;
  return s;
}

double DistributionSpec::spike_magnitude() const {
  if (family_ == Family::spike13) return std::cbrt(gamma_);
  if (family_ == Family::spike12) return std::sqrt(gamma_);
  throw std::logic_error("spike_magnitude: not a spike family");
}

double DistributionSpec::spike_variance() const {
  // 2 * (1/(2 gamma)) * gamma^{2a} = gamma^{2a - 1}
  if (family_ == Family::spike13) return std::pow(gamma_, -1.0 / 3.0);
  if (family_ == Family::spike12) return 1.0;
  throw std::logic_error("spike_variance: not a spike family");
}

const CovarianceSpec& DistributionSpec::gaussian_covariance() const {
  if (family_ != Family::gaussian || cov_.empty()) {
    throw std::logic_error("gaussian_covariance: not a gaussian spec");
  }
  return cov_.front();
}

CovarianceSpec DistributionSpec::exact_covariance() const {
  switch (family_) {
    case Family::gaussian:
      return cov_.front();
    case Family::spike13:
    case Family::spike12: {
      Eigen::VectorXd v = Eigen::VectorXd::Ones(dim_);
      v(dim_ - 1) = spike_variance();
      return CovarianceSpec::diagonal(v);
    }
    case Family::product:
      // Both shipped coordinate laws are standardized.
      return CovarianceSpec::identity(dim_);
    case Family::multiplier:
      // E[xi^2] = 1 and the base coordinates are independent Rademacher.
      return CovarianceSpec::identity(dim_);
  }
  throw std::logic_error("exact_covariance: unreachable");
}

DistributionSpec DistributionSpec::gaussian_match() const {
  return DistributionSpec::gaussian(exact_covariance());
}

double scaled_t4_quantile(double u) {
  // Closed-form t(4) quantile, scaled by 1/sqrt(2) to unit variance.
  const double alpha = 4.0 * u * (1.0 - u);
  const double sa = std::sqrt(alpha);
  const double q = std::cos(std::acos(sa) / 3.0) / sa;
  const double t = 2.0 * std::sqrt(std::max(q - 1.0, 0.0));
  const double signed_t = (u < 0.5) ? -t : t;
  return signed_t * 0.7071067811865475244008444;
}

namespace {

// One row of draws, addressed positionally: row i consumes indices
// [i*stride, (i+1)*stride). This keeps sampling embarrassingly parallel
// and bit-reproducible for any sharding of the rows.
struct RowSampler {
  const DistributionSpec& spec;
  const PhiloxStream& rng;
  const Eigen::MatrixXd* factor;  // gaussian family only
  int p;

  std::int64_t stride() const {
    return spec.family() == Family::multiplier ? p + 1 : p;
  }

  void fill(std::int64_t row_index, double* out) const {
    const std::uint64_t base =
        static_cast<std::uint64_t>(row_index) * static_cast<std::uint64_t>(stride());
    switch (spec.family()) {
      case Family::gaussian: {
        Eigen::VectorXd z(p);
        for (int j = 0; j < p; ++j) z(j) = rng.normal_at(base + j);
        Eigen::Map<Eigen::VectorXd>(out, p) = (*factor) * z;
        return;
      }
      case Family::spike13:
      case Family::spike12: {
        for (int j = 0; j < p - 1; ++j) out[j] = rng.normal_at(base + j);
        const double u = rng.uniform_at(base + p - 1);
        const double inv_g = 1.0 / spec.gamma();
        if (u < 1.0 - inv_g) {
          out[p - 1] = 0.0;
        } else if (u < 1.0 - 0.5 * inv_g) {
          out[p - 1] = spec.spike_magnitude();
        } else {
          out[p - 1] = -spec.spike_magnitude();
        }
        return;
      }
      case Family::product: {
        for (int j = 0; j < p; ++j) {
          if (spec.coordinates()[j] == CoordinateLaw::normal) {
            out[j] = rng.normal_at(base + j);
          } else {
            out[j] = rng.uniform_at(base + j) < 0.5 ? -1.0 : 1.0;
          }
        }
        return;
      }
      case Family::multiplier: {
        const double xi = scaled_t4_quantile(rng.uniform_at(base));
        for (int j = 0; j < p; ++j) {
          const double b = rng.uniform_at(base + 1 + j) < 0.5 ? -1.0 : 1.0;
          out[j] = xi * b;
        }
        return;
      }
    }
    throw std::logic_error("RowSampler: unreachable");
  }
};

}  // namespace

SampleBatch sample(const DistributionSpec& spec, std::int64_t count,
                   std::uint64_t seed, std::uint64_t stream_id) {
  if (count < 1) throw std::invalid_argument("sample: count must be >= 1");
  const int p = spec.dim();
  PhiloxStream rng(seed, stream_id);

  Eigen::MatrixXd factor;
  if (spec.family() == Family::gaussian) {
    factor = factor_for_sampling(spec.gaussian_covariance());
  }
  RowSampler sampler{spec, rng, &factor, p};

  SampleBatch batch;
  batch.seed = seed;
  batch.stream_id = stream_id;
  batch.data.resize(count, p);
  Eigen::VectorXd row(p);
  for (std::int64_t i = 0; i < count; ++i) {
    sampler.fill(i, row.data());
    batch.data.row(i) = row;
  }
  if (!batch.data.allFinite()) {
    throw std::runtime_error("sample: produced non-finite values");
  }
  return batch;
}

SampleBatch normalized_sum(const DistributionSpec& spec, std::int64_t n,
                           std::int64_t count, std::uint64_t seed,
                           std::uint64_t stream_id) {
  if (n < 1) throw std::invalid_argument("normalized_sum: n must be >= 1");
  if (count < 1) throw std::invalid_argument("normalized_sum: count must be >= 1");
  if (spec.family() == Family::gaussian) {
    // N(0, Sigma) is stable under normalized summation.
    return sample(spec, count, seed, stream_id);
  }
  if (spec.family() == Family::spike13 || spec.family() == Family::spike12) {
    const double extreme = spec.spike_magnitude() * std::sqrt(static_cast<double>(n));
    if (!std::isfinite(extreme)) {
      throw std::invalid_argument("normalized_sum: gamma^exponent * sqrt(n) overflows");
    }
  }

  const int p = spec.dim();
  PhiloxStream rng(seed, stream_id);
  Eigen::MatrixXd factor;  // unused for non-gaussian families
  RowSampler sampler{spec, rng, &factor, p};
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));

  SampleBatch batch;
  batch.seed = seed;
  batch.stream_id = stream_id;
  batch.data.resize(count, p);
  Eigen::VectorXd acc(p), row(p);
  for (std::int64_t i = 0; i < count; ++i) {
    acc.setZero();
    for (std::int64_t k = 0; k < n; ++k) {
      sampler.fill(i * n + k, row.data());
      acc += row;
    }
    batch.data.row(i) = acc * inv_sqrt_n;
  }
  if (!batch.data.allFinite()) {
    throw std::runtime_error("normalized_sum: produced non-finite values");
  }
  return batch;
}

double spike_zero_probability(std::int64_t n, double gamma) {
  if (n < 1) throw std::invalid_argument("spike_zero_probability: n must be >= 1");
  if (!(gamma > 1.0)) throw std::invalid_argument("spike_zero_probability: gamma must be > 1");
  const double q = 1.0 / gamma;
  // k = 0 term is computed exactly as pow(1-q, n) so the documented
  // inequality "result >= (1-1/gamma)^n" holds without tolerance: the
  // remaining terms are nonnegative.
  double total = std::pow(1.0 - q, static_cast<double>(n));
  for (std::int64_t k = 2; k <= n; k += 2) {
    const double log_term =
        std::lgamma(static_cast<double>(n + 1)) - std::lgamma(static_cast<double>(k + 1)) -
        std::lgamma(static_cast<double>(n - k + 1)) + static_cast<double>(k) * std::log(q) +
        static_cast<double>(n - k) * std::log1p(-q) +
        std::lgamma(static_cast<double>(k + 1)) - 2.0 * std::lgamma(static_cast<double>(k / 2 + 1)) -
        static_cast<double>(k) * std::log(2.0);
    total += std::exp(log_term);
  }
  return std::min(total, 1.0);
}

}  // namespace hdclt
