#include "hdclt/json_io.hpp"

#include <stdexcept>

namespace hdclt {

namespace {

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) {
    throw std::invalid_argument("covariance: expected a non-empty array of arrays");
  }
  const std::size_t rows = j.size();
  const std::size_t cols = j.at(0).size();
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto& row = j.at(i);
    if (row.size() != cols) {
      throw std::invalid_argument("covariance: ragged rows");
    }
    for (std::size_t k = 0; k < cols; ++k) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          row.at(k).get<double>();
    }
  }
  return m;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

json covariance_to_json(const CovarianceSpec& cov) {
  return matrix_to_json(cov.entries());
}

CovarianceSpec covariance_from_json(const json& j) {
  return CovarianceSpec(matrix_from_json(j));
}

json distribution_to_json(const DistributionSpec& spec) {
  json j;
  j["family"] = family_tag(spec.family());
  switch (spec.family()) {
    case Family::gaussian:
      j["covariance"] = covariance_to_json(spec.gaussian_covariance());
      break;
    case Family::spike13:
    case Family::spike12:
      j["p"] = spec.dim();
      j["gamma"] = spec.gamma();
      break;
    case Family::product: {
      json coords = json::array();
      for (const auto c : spec.coordinates()) {
        coords.push_back(c == CoordinateLaw::normal ? "normal" : "rademacher");
      }
      j["coordinates"] = std::move(coords);
      break;
    }
    case Family::multiplier:
      j["p"] = spec.dim();
      break;
  }
  return j;
}

DistributionSpec distribution_from_json(const json& j) {
  if (!j.is_object() || !j.contains("family")) {
    throw std::invalid_argument("distribution: expected an object with a \"family\" tag");
  }
  const Family f = family_from_tag(j.at("family").get<std::string>());
  switch (f) {
    case Family::gaussian:
      if (!j.contains("covariance")) {
        throw std::invalid_argument("distribution: gaussian needs \"covariance\"");
      }
      return DistributionSpec::gaussian(covariance_from_json(j.at("covariance")));
    case Family::spike13:
    case Family::spike12:
      if (!j.contains("p") || !j.contains("gamma")) {
        throw std::invalid_argument("distribution: spike needs \"p\" and \"gamma\"");
      }
      return DistributionSpec::spike(j.at("p").get<int>(), j.at("gamma").get<double>(), f);
    case Family::product: {
      if (!j.contains("coordinates")) {
        throw std::invalid_argument("distribution: product needs \"coordinates\"");
      }
      std::vector<CoordinateLaw> coords;
      for (const auto& c : j.at("coordinates")) {
        const std::string tag = c.get<std::string>();
        if (tag == "normal") {
          coords.push_back(CoordinateLaw::normal);
        } else if (tag == "rademacher") {
          coords.push_back(CoordinateLaw::rademacher);
        } else {
          throw std::invalid_argument("distribution: unknown coordinate law \"" + tag + "\"");
        }
      }
      return DistributionSpec::product(std::move(coords));
    }
    case Family::multiplier:
      if (!j.contains("p")) {
        throw std::invalid_argument("distribution: multiplier needs \"p\"");
      }
      return DistributionSpec::multiplier(j.at("p").get<int>());
  }
  throw std::logic_error("distribution_from_json: unreachable");
}

json atomic_law_to_json(const AtomicLaw& law) {
  json j;
  j["dim"] = law.dim();
  json atoms = json::array();
  for (const auto& a : law.atoms()) {
    json pt = json::array();
    for (Eigen::Index k = 0; k < a.point.size(); ++k) pt.push_back(a.point(k));
    atoms.push_back(json{{"point", std::move(pt)}, {"mass", a.mass}});
  }
  j["atoms"] = std::move(atoms);
  return j;
}

AtomicLaw atomic_law_from_json(const json& j) {
  if (!j.is_object() || !j.contains("dim") || !j.contains("atoms")) {
    throw std::invalid_argument("atomic law: expected {\"dim\", \"atoms\"}");
  }
  const int dim = j.at("dim").get<int>();
  std::vector<Atom> atoms;
  for (const auto& a : j.at("atoms")) {
    const auto& pt = a.at("point");
    Eigen::VectorXd point(pt.size());
    for (std::size_t k = 0; k < pt.size(); ++k) {
      point(static_cast<Eigen::Index>(k)) = pt.at(k).get<double>();
    }
    atoms.push_back(Atom{std::move(point), a.at("mass").get<double>()});
  }
  return AtomicLaw(dim, std::move(atoms));
}

json estimate_to_json(const EstimateWithCI& est) {
  json j;
  j["value"] = est.value;
  j["se"] = est.std_error;
  j["replications"] = est.replications;
  j["ci"] = json::array({est.ci_low, est.ci_high});
  j["method"] = method_tag(est.method);
  if (est.upper_surrogate) j["upper_surrogate"] = true;
  return j;
}

}  // namespace hdclt
