#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hdclt/distributions.hpp"
#include "hdclt/json_io.hpp"

namespace hdclt {

// Seeded, budgeted description of one experiment. Everything needed to
// reproduce a report bit for bit is in here (plus the library version).
struct ExperimentConfig {
  std::string experiment;
  std::optional<DistributionSpec> distribution;
  std::vector<std::int64_t> n_grid;
  int p = 0;  // 0 = experiment default
  std::int64_t replications = 100000;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string output_path;
  double budget = 1e10;  // scalar-draw guard

  // Experiment-specific knobs; empty vectors mean experiment defaults.
  std::vector<double> epsilon_grid;
  std::vector<double> delta_grid;
  std::vector<int> p_grid;
  std::vector<double> gamma_grid;
  int pair_count = 0;
  std::string rect_strategy;  // "pooled_corners" | "quantile_grid"
  int rect_k = 0;
  json bound_eval;  // formula + parameters for the bound_eval experiment

  json echo;  // raw config as parsed

  static ExperimentConfig from_json(const json& j);
  static ExperimentConfig from_file(const std::string& path);
};

struct Assertion {
  std::string name;
  bool pass = false;
  bool inconclusive = false;
  double value = 0.0;
  double bound = 0.0;
  std::string detail;
};

struct ExperimentReport {
  json config_echo;
  json results;
  std::vector<Assertion> assertions;
  bool pass = true;
  bool inconclusive = false;
  double wall_time_s = 0.0;
  int workers_used = 1;

  json to_json() const;
  /// The deterministic part of the report: results + assertions, dumped
  /// canonically (sorted keys). Byte-identical across reruns and worker
  /// counts; report-diff compares exactly this.
  std::string canonical_numeric_dump() const;
  void write(const std::string& path, const std::string& format) const;
};

ExperimentReport run_experiment(const ExperimentConfig& cfg);

/// `run`, `bound-eval`, `oracle`, `report-diff`. Exit 0 on pass, 2 on
/// assertion failure or report mismatch, 1 on usage/config errors.
int cli_main(int argc, char** argv);

}  // namespace hdclt
