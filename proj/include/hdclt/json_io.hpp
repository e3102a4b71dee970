#pragma once

#include <json.hpp>

#include "hdclt/distributions.hpp"
#include "hdclt/estimate.hpp"
#include "hdclt/matrix_core.hpp"
#include "hdclt/oracle.hpp"

namespace hdclt {

using json = nlohmann::json;

// Schemas (also documented in the README):
//   covariance: row-major array of arrays
//   distribution: {"family": "gaussian", "covariance": [[...]]}
//                 {"family": "spike13"|"spike12", "p": int, "gamma": real}
//                 {"family": "product", "coordinates": ["normal", ...]}
//                 {"family": "multiplier", "p": int}
//   atomic law: {"dim": int, "atoms": [{"point": [...], "mass": real}, ...]}
//   estimate: {"value", "se", "replications", "ci": [lo, hi],
//              "method", "upper_surrogate"?}

json covariance_to_json(const CovarianceSpec& cov);
CovarianceSpec covariance_from_json(const json& j);

json distribution_to_json(const DistributionSpec& spec);
DistributionSpec distribution_from_json(const json& j);

json atomic_law_to_json(const AtomicLaw& law);
AtomicLaw atomic_law_from_json(const json& j);

json estimate_to_json(const EstimateWithCI& est);

}  // namespace hdclt
