#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "hdclt/harness.hpp"

using namespace hdclt;

namespace {

ExperimentConfig config_from_text(const char* text) {
  return ExperimentConfig::from_json(json::parse(text));
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_THROWS_AS(config_from_text(R"({"n_grid": [1, 2]})"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_text(R"({"experiment": "brownian_motion"})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      config_from_text(R"({"experiment": "rate_scaling", "n_grid": [16, 16]})"),
      std::invalid_argument);
  CHECK_THROWS_AS(
      config_from_text(R"({"experiment": "rate_scaling", "replications": 10})"),
      std::invalid_argument);
  CHECK_THROWS_AS(ExperimentConfig::from_file("/nonexistent/config.json"),
                  std::invalid_argument);
  const auto cfg = config_from_text(
      R"({"experiment": "counterexample_thm2", "n_grid": [2, 4], "replications": 2000})");
  CHECK(cfg.seed == 1);
  CHECK(cfg.workers == 1);
}

TEST_CASE("bound_eval experiment evaluates the named formula") {
  const auto cfg = config_from_text(R"({
    "experiment": "bound_eval",
    "bound_eval": {"formula": "theorem1", "n": 100, "p": 1, "nu1": 1.0, "nu3": 1.0,
                   "sigma_min": 1.0, "sigma_under": 1.0, "c": 1.0}
  })");
  const auto report = run_experiment(cfg);
  CHECK(report.pass);
  CHECK(report.results.at("value").get<double>() ==
        doctest::Approx(1.1136987000824332).epsilon(1e-12));
}

TEST_CASE("lopes comparison reproduces the separation") {
  const auto cfg = config_from_text(R"({"experiment": "lopes_comparison"})");
  const auto report = run_experiment(cfg);
  CHECK(report.pass);
  const auto& points = report.results.at("points");
  REQUIRE(points.size() == 4);
  CHECK(points.at(0).at("ratio").get<double>() > points.at(3).at("ratio").get<double>());
}

TEST_CASE("counterexample experiment: exact bounds and determinism") {
  const auto cfg = config_from_text(R"({
    "experiment": "counterexample_thm2",
    "n_grid": [2, 4], "p": 2, "replications": 4000, "seed": 5
  })");
  const auto report = run_experiment(cfg);
  CHECK(report.pass);
  const auto& points = report.results.at("points");
  CHECK(points.at(0).at("zero_probability").get<double>() == doctest::Approx(0.375).epsilon(1e-12));

  // Identical config reruns and worker counts give identical bytes.
  const auto again = run_experiment(cfg);
  CHECK(report.canonical_numeric_dump() == again.canonical_numeric_dump());
  auto parallel = cfg;
  parallel.workers = 4;
  const auto wide = run_experiment(parallel);
  CHECK(report.canonical_numeric_dump() == wide.canonical_numeric_dump());
}

TEST_CASE("counterexample thm3 reports the implied constant") {
  const auto cfg = config_from_text(R"({
    "experiment": "counterexample_thm3",
    "n_grid": [4], "p": 2, "replications": 4000, "seed": 5
  })");
  const auto report = run_experiment(cfg);
  CHECK(report.pass);
  const auto& pt = report.results.at("points").at(0);
  CHECK(pt.contains("implied_constant"));
  CHECK(pt.at("rhs_ratio").get<double>() > 0.0);
}

TEST_CASE("rate_scaling exact path fits the expected slope") {
  const auto cfg = config_from_text(R"({
    "experiment": "rate_scaling", "n_grid": [16, 64, 256]
  })");
  const auto report = run_experiment(cfg);
  CHECK(report.pass);
  const double slope = report.results.at("fit").at("slope").get<double>();
  CHECK(slope < -0.35);
  CHECK(slope > -0.65);
  CHECK(report.results.at("points").at(0).at("exact").get<bool>());
}

TEST_CASE("rate_scaling gaussian path: estimate consistent with zero") {
  const auto cfg = config_from_text(R"({
    "experiment": "rate_scaling",
    "distribution": {"family": "gaussian", "covariance": [[1.0]]},
    "n_grid": [4, 16], "replications": 4000
  })");
  const auto report = run_experiment(cfg);
  CHECK(report.pass);
  CHECK(!report.results.at("points").at(0).at("exact").get<bool>());
  CHECK(!report.results.contains("fit"));
}

TEST_CASE("HDCLT_BUDGET provides the default budget") {
  setenv("HDCLT_BUDGET", "50", 1);
  const auto cfg = config_from_text(R"({
    "experiment": "counterexample_thm2", "n_grid": [2, 4], "p": 2,
    "replications": 4000
  })");
  unsetenv("HDCLT_BUDGET");
  CHECK(cfg.budget == 50.0);
  CHECK_THROWS_WITH_AS(run_experiment(cfg), doctest::Contains("budget"),
                       std::invalid_argument);
  // An explicit config budget wins over the environment.
  setenv("HDCLT_BUDGET", "50", 1);
  const auto explicit_cfg = config_from_text(R"({
    "experiment": "counterexample_thm2", "n_grid": [2, 4], "p": 2,
    "replications": 4000, "budget": 1e9
  })");
  unsetenv("HDCLT_BUDGET");
  CHECK(explicit_cfg.budget == 1e9);
}

TEST_CASE("budget guard refuses before sampling") {
  const auto cfg = config_from_text(R"({
    "experiment": "counterexample_thm2",
    "n_grid": [2, 4], "p": 2, "replications": 4000, "budget": 100
  })");
  CHECK_THROWS_WITH_AS(run_experiment(cfg), doctest::Contains("budget"),
                       std::invalid_argument);
}

TEST_CASE("lemma_regularity holds with constant one") {
  const auto cfg = config_from_text(R"({
    "experiment": "lemma_regularity", "pairs": 30
  })");
  const auto report = run_experiment(cfg);
  CHECK(report.pass);
}

TEST_CASE("lemma_pseudo_moment direction holds") {
  const auto cfg = config_from_text(R"({
    "experiment": "lemma_pseudo_moment", "pairs": 3, "replications": 2000
  })");
  const auto report = run_experiment(cfg);
  CHECK(report.pass);
}

TEST_CASE("lemma_smoothing fits a finite stable constant") {
  const auto cfg = config_from_text(R"({
    "experiment": "lemma_smoothing", "pairs": 1, "replications": 4000,
    "epsilon_grid": [0.1, 0.3, 0.6]
  })");
  const auto report = run_experiment(cfg);
  CHECK((report.pass || report.inconclusive));
  CHECK(report.results.contains("fitted_constant"));
}

TEST_CASE("lemma_ideal_metric fits a finite stable constant") {
  const auto cfg = config_from_text(R"({
    "experiment": "lemma_ideal_metric", "pairs": 2, "replications": 4000,
    "epsilon_grid": [0.5, 1.0, 2.0]
  })");
  const auto report = run_experiment(cfg);
  CHECK((report.pass || report.inconclusive));
}

TEST_CASE("anti_concentration on a reduced grid") {
  const auto cfg = config_from_text(R"({
    "experiment": "anti_concentration", "replications": 20000,
    "p_grid": [1, 2, 16], "delta_grid": [0.1, 0.2]
  })");
  const auto report = run_experiment(cfg);
  CHECK(report.pass);
  bool found_density_check = false;
  for (const auto& a : report.assertions) {
    if (a.name == "p1_band_matches_density") found_density_check = true;
  }
  CHECK(found_density_check);
}

TEST_CASE("report serialization round trip") {
  const auto cfg = config_from_text(R"({
    "experiment": "bound_eval",
    "bound_eval": {"formula": "nazarov", "sigma_min": 1.0, "p": 4, "delta": 0.25, "C": 1.0}
  })");
  const auto report = run_experiment(cfg);
  const json j = report.to_json();
  CHECK(j.contains("config_hash"));
  CHECK(j.at("meta").at("rng").get<std::string>() == "philox4x32-10");

  const std::string path = "test_report_tmp.json";
  report.write(path, "json");
  std::ifstream in(path);
  REQUIRE(in.good());
  json parsed;
  in >> parsed;
  CHECK(parsed.at("results").dump() == j.at("results").dump());
  std::remove(path.c_str());

  const std::string csv_path = "test_report_tmp.csv";
  report.write(csv_path, "csv");
  std::ifstream csv(csv_path);
  REQUIRE(csv.good());
  std::string header;
  std::getline(csv, header);
  CHECK(header.find("value") != std::string::npos);
  std::remove(csv_path.c_str());
}
