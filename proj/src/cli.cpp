#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hdclt/bounds.hpp"
#include "hdclt/harness.hpp"
#include "hdclt/json_io.hpp"
#include "hdclt/version.hpp"

namespace hdclt {

namespace {

json read_json_input(const std::string& source) {
  json j;
  if (source == "-") {
    std::cin >> j;
    return j;
  }
  std::ifstream in(source);
  if (!in) throw std::invalid_argument("cannot open \"" + source + "\"");
  in >> j;
  return j;
}

int do_run(const std::string& config_path, const CLI::Option* seed_opt,
           std::uint64_t seed, const CLI::Option* workers_opt, int workers,
           const std::string& output_format, const CLI::Option* budget_opt,
           double budget, const std::string& output_override) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  if (seed_opt->count() > 0) {
    cfg.seed = seed;
    cfg.echo["seed"] = seed;
  }
  if (workers_opt->count() > 0) {
    cfg.workers = workers;
    cfg.echo["workers"] = workers;
  }
  if (budget_opt->count() > 0) {
    cfg.budget = budget;
    cfg.echo["budget"] = budget;
  }
  if (!output_override.empty()) cfg.output_path = output_override;

  const ExperimentReport report = run_experiment(cfg);
  for (const auto& a : report.assertions) {
    const char* verdict = a.inconclusive ? "INCONCLUSIVE" : (a.pass ? "pass" : "FAIL");
    std::cout << verdict << "  " << a.name << "  value=" << a.value
              << " bound=" << a.bound << "\n";
  }
  std::cout << (report.pass ? "PASS" : "FAIL")
            << (report.inconclusive ? " (with inconclusive points)" : "") << "\n";
  if (!cfg.output_path.empty()) {
    report.write(cfg.output_path, output_format);
    std::cout << "report written to " << cfg.output_path << "\n";
  }
  return report.pass ? 0 : 2;
}

int do_oracle(const std::string& op, const std::string& input) {
  const json in = op == "spike-zero-prob" || !input.empty() ? read_json_input(input) : json{};
  json out;
  if (op == "mu") {
    out["value"] = exact_mu_atomic(atomic_law_from_json(in.at("a")),
                                   atomic_law_from_json(in.at("b")));
  } else if (op == "mu-vs-gaussian") {
    const AtomicLaw a = atomic_law_from_json(in.at("a"));
    Eigen::VectorXd var(a.dim());
    const auto& v = in.at("variances");
    if (static_cast<int>(v.size()) != a.dim()) {
      throw std::invalid_argument("oracle: variances must have length dim");
    }
    for (int j = 0; j < a.dim(); ++j) var(j) = v.at(j).get<double>();
    const auto res = exact_mu_atomic_vs_gaussian(a, CovarianceSpec::diagonal(var));
    out["value"] = res.value;
    out["gap_bound"] = res.gap_bound;
  } else if (op == "pseudo-moment") {
    out["value"] = exact_pseudo_moment(atomic_law_from_json(in.at("a")),
                                       atomic_law_from_json(in.at("b")),
                                       in.at("order").get<int>());
  } else if (op == "convolve") {
    out = atomic_law_to_json(convolve(atomic_law_from_json(in.at("a")),
                                      atomic_law_from_json(in.at("b"))));
  } else if (op == "scale") {
    out = atomic_law_to_json(scale(atomic_law_from_json(in.at("a")),
                                   in.at("t").get<double>()));
  } else if (op == "spike-zero-prob") {
    out["value"] = spike_zero_probability(in.at("n").get<std::int64_t>(),
                                          in.at("gamma").get<double>());
  } else {
    throw std::invalid_argument("oracle: unknown op \"" + op +
                                "\" (mu, mu-vs-gaussian, pseudo-moment, convolve, "
                                "scale, spike-zero-prob)");
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int do_report_diff(const std::string& path_a, const std::string& path_b) {
  const json a = read_json_input(path_a);
  const json b = read_json_input(path_b);
  for (const char* key : {"results", "assertions", "pass"}) {
    if (!a.contains(key) || !b.contains(key)) {
      throw std::invalid_argument(std::string("report-diff: reports must contain \"") +
                                  key + "\"");
    }
  }
  json na{{"results", a.at("results")}, {"assertions", a.at("assertions")}, {"pass", a.at("pass")}};
  json nb{{"results", b.at("results")}, {"assertions", b.at("assertions")}, {"pass", b.at("pass")}};
  if (na.dump() == nb.dump()) {
    std::cout << "reports match (numeric sections are byte-identical)\n";
    return 0;
  }
  std::cout << "reports differ\n";
  for (const char* key : {"results", "assertions", "pass"}) {
    if (na.at(key).dump() != nb.at(key).dump()) {
      std::cout << "  section \"" << key << "\" differs\n";
    }
  }
  return 2;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for high-dimensional Gaussian approximation "
               "over rectangles: exact oracles, Monte-Carlo estimators, bound "
               "evaluators, and seeded experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  // run
  auto* run = app.add_subcommand("run", "run an experiment from a JSON config");
  std::string config_path, output_format = "json", output_override;
  std::uint64_t seed = 0;
  int workers = 1;
  double budget = 0.0;
  run->add_option("config", config_path, "experiment config file")->required();
  auto* seed_opt = run->add_option("--seed", seed, "override the config seed");
  auto* workers_opt = run->add_option("--workers", workers, "override worker count");
  run->add_option("--output", output_format, "report format")
      ->check(CLI::IsMember({"json", "csv"}));
  auto* budget_opt = run->add_option("--budget", budget, "override the scalar-draw budget");
  run->add_option("--output-path", output_override, "override the report path");

  // bound-eval
  auto* be = app.add_subcommand("bound-eval", "evaluate a closed-form bound");
  std::string formula;
  be->add_option("formula", formula, "theorem1 | lopes | nazarov")->required();
  std::int64_t be_n = 1;
  int be_p = 1;
  double be_nu1 = 0.0, be_nu3 = 0.0, be_sigma_min = 1.0, be_sigma_under = 1.0;
  double be_c = 1.0, be_nu = 1.0, be_rho = 1.0, be_delta = 0.0;
  be->add_option("--n", be_n);
  be->add_option("--p", be_p);
  be->add_option("--nu1", be_nu1);
  be->add_option("--nu3", be_nu3);
  be->add_option("--sigma-min", be_sigma_min);
  be->add_option("--sigma-under", be_sigma_under);
  be->add_option("--c", be_c, "universal constant (also C for lopes/nazarov)");
  be->add_option("--nu", be_nu, "sub-Gaussian norm (lopes)");
  be->add_option("--rho", be_rho, "min correlation eigenvalue (lopes)");
  be->add_option("--delta", be_delta, "band width (nazarov)");

  // oracle
  auto* orc = app.add_subcommand("oracle", "exact finite computations on JSON inputs");
  std::string oracle_op, oracle_input;
  orc->add_option("op", oracle_op, "mu | mu-vs-gaussian | pseudo-moment | convolve | scale | spike-zero-prob")
      ->required();
  orc->add_option("input", oracle_input, "JSON file or - for stdin")->required();

  // report-diff
  auto* diff = app.add_subcommand("report-diff", "compare the numeric sections of two reports");
  std::string diff_a, diff_b;
  diff->add_option("a", diff_a)->required();
  diff->add_option("b", diff_b)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) {
      return do_run(config_path, seed_opt, seed, workers_opt, workers, output_format,
                    budget_opt, budget, output_override);
    }
    if (be->parsed()) {
      double value = 0.0;
      if (formula == "theorem1") {
        value = theorem1_rhs(BoundInputs{be_n, be_p, be_nu1, be_nu3, be_sigma_min,
                                         be_sigma_under, be_c});
      } else if (formula == "lopes") {
        value = lopes_rhs(be_nu, be_rho, be_n, be_p, be_c);
      } else if (formula == "nazarov") {
        value = nazarov_rhs(be_sigma_min, be_p, be_delta, be_c);
      } else {
        throw std::invalid_argument("bound-eval: unknown formula \"" + formula + "\"");
      }
      std::cout << std::setprecision(17) << value << "\n";
      return 0;
    }
    if (orc->parsed()) return do_oracle(oracle_op, oracle_input);
    if (diff->parsed()) return do_report_diff(diff_a, diff_b);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::length_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace hdclt
