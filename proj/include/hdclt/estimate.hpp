#pragma once

#include <algorithm>
#include <cstdint>
#include <string>

namespace hdclt {

enum class EstimateMethod { empirical_sup, plugin_moment, test_function_sup };

std::string method_tag(EstimateMethod m);

// Point estimate with Monte-Carlo uncertainty. The interval always
// contains the point estimate (percentile intervals of sup statistics can
// otherwise sit strictly above it).
struct EstimateWithCI {
  double value = 0.0;
  double std_error = 0.0;
  std::int64_t replications = 0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  EstimateMethod method = EstimateMethod::empirical_sup;
  /// True when the value is the E||X||^k + E||Y||^k upper-bound surrogate
  /// rather than an exact pseudo-moment.
  bool upper_surrogate = false;

  void clip_ci_to_value() {
    ci_low = std::min(ci_low, value);
    ci_high = std::max(ci_high, value);
  }
};

}  // namespace hdclt
