#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hdclt/bounds.hpp"
#include "hdclt/distributions.hpp"
#include "hdclt/estimators.hpp"
#include "hdclt/harness.hpp"
#include "hdclt/json_io.hpp"
#include "hdclt/matrix_core.hpp"
#include "hdclt/normal.hpp"
#include "hdclt/oracle.hpp"
#include "hdclt/version.hpp"

namespace py = pybind11;
using namespace hdclt;

namespace {

json parse(const std::string& text) { return json::parse(text); }

py::dict estimate_dict(const EstimateWithCI& est) {
  py::dict d;
  d["value"] = est.value;
  d["std_error"] = est.std_error;
  d["replications"] = est.replications;
  d["ci"] = py::make_tuple(est.ci_low, est.ci_high);
  d["method"] = method_tag(est.method);
  d["upper_surrogate"] = est.upper_surrogate;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Exact oracles, seeded Monte-Carlo estimators, and bound evaluators "
            "for Gaussian approximation over rectangles";
  m.attr("__version__") = kVersion;
  m.attr("rng_id") = kRngId;

  // matrix core
  m.def("min_eigenvalue",
        [](const Eigen::MatrixXd& sigma) { return min_eigenvalue(CovarianceSpec(sigma)); },
        py::arg("sigma"));
  m.def("factor_for_sampling",
        [](const Eigen::MatrixXd& sigma) { return factor_for_sampling(CovarianceSpec(sigma)); },
        py::arg("sigma"));
  m.def("gaussian_split",
        [](const Eigen::MatrixXd& sigma) {
          const auto split = gaussian_split(CovarianceSpec(sigma));
          return py::make_tuple(split.lambda, split.remainder.entries());
        },
        py::arg("sigma"));

  // distributions (specs as JSON strings; see README for the schema)
  m.def("sample",
        [](const std::string& spec, std::int64_t count, std::uint64_t seed,
           std::uint64_t stream_id) {
          return sample(distribution_from_json(parse(spec)), count, seed, stream_id).data;
        },
        py::arg("spec"), py::arg("count"), py::arg("seed") = 1, py::arg("stream_id") = 0);
  m.def("normalized_sum",
        [](const std::string& spec, std::int64_t n, std::int64_t count, std::uint64_t seed,
           std::uint64_t stream_id) {
          return normalized_sum(distribution_from_json(parse(spec)), n, count, seed, stream_id)
              .data;
        },
        py::arg("spec"), py::arg("n"), py::arg("count"), py::arg("seed") = 1,
        py::arg("stream_id") = 0);
  m.def("exact_covariance",
        [](const std::string& spec) {
          return distribution_from_json(parse(spec)).exact_covariance().entries();
        },
        py::arg("spec"));
  m.def("spike_zero_probability", &spike_zero_probability, py::arg("n"), py::arg("gamma"));

  // oracle (atomic laws as JSON strings)
  m.def("exact_mu_atomic",
        [](const std::string& a, const std::string& b) {
          return exact_mu_atomic(atomic_law_from_json(parse(a)), atomic_law_from_json(parse(b)));
        },
        py::arg("a"), py::arg("b"));
  m.def("exact_mu_atomic_vs_gaussian",
        [](const std::string& a, const Eigen::VectorXd& variances) {
          const auto res = exact_mu_atomic_vs_gaussian(atomic_law_from_json(parse(a)),
                                                       CovarianceSpec::diagonal(variances));
          return py::make_tuple(res.value, res.gap_bound);
        },
        py::arg("a"), py::arg("variances"));
  m.def("exact_pseudo_moment",
        [](const std::string& a, const std::string& b, int order) {
          return exact_pseudo_moment(atomic_law_from_json(parse(a)),
                                     atomic_law_from_json(parse(b)), order);
        },
        py::arg("a"), py::arg("b"), py::arg("order"));
  m.def("convolve",
        [](const std::string& a, const std::string& b) {
          return atomic_law_to_json(
                     convolve(atomic_law_from_json(parse(a)), atomic_law_from_json(parse(b))))
              .dump();
        },
        py::arg("a"), py::arg("b"));

  // estimators
  m.def("mu_hat_between",
        [](const std::string& spec_u, const std::string& spec_v, std::int64_t n,
           std::int64_t count, std::uint64_t seed, const std::string& strategy, int k) {
          const auto su = distribution_from_json(parse(spec_u));
          const auto sv = distribution_from_json(parse(spec_v));
          const SampleBatch u = normalized_sum(su, n, count, seed, 0);
          const SampleBatch v = normalized_sum(sv, n, count, seed, 1);
          const RectangleFamily rects = strategy == "quantile_grid"
                                            ? RectangleFamily::quantile_grid(k)
                                            : RectangleFamily::pooled_corners();
          return estimate_dict(mu_hat(u, v, rects));
        },
        py::arg("spec_u"), py::arg("spec_v"), py::arg("n") = 1, py::arg("count") = 10000,
        py::arg("seed") = 1, py::arg("strategy") = "pooled_corners", py::arg("k") = 16);
  m.def("rate_fit",
        [](const std::vector<std::pair<double, double>>& points) {
          const RateFit fit = rate_fit(points);
          py::dict d;
          d["slope"] = fit.slope;
          d["intercept"] = fit.intercept;
          d["r_squared"] = fit.r_squared;
          d["slope_std_error"] = fit.slope_std_error;
          return d;
        },
        py::arg("points"));

  // bounds
  m.def("theorem1_rhs",
        [](std::int64_t n, int p, double nu1, double nu3, double sigma_min,
           double sigma_under, double c) {
          return theorem1_rhs(BoundInputs{n, p, nu1, nu3, sigma_min, sigma_under, c});
        },
        py::arg("n"), py::arg("p"), py::arg("nu1"), py::arg("nu3"),
        py::arg("sigma_min") = 1.0, py::arg("sigma_under") = 1.0, py::arg("c") = 1.0);
  m.def("lopes_rhs", &lopes_rhs, py::arg("nu"), py::arg("rho"), py::arg("n"), py::arg("p"),
        py::arg("C") = 1.0);
  m.def("nazarov_rhs", &nazarov_rhs, py::arg("sigma_min"), py::arg("p"), py::arg("delta"),
        py::arg("C") = 1.0);
  m.def("phi_eps", &phi_eps, py::arg("s"), py::arg("r"), py::arg("eps"));
  m.def("normal_quantile", &normal_quantile, py::arg("p"));
  m.def("epsilon_ladder",
        [](std::int64_t n, double eps, double sigma_under, std::int64_t m_count) {
          const auto ladder = epsilon_ladder(n, eps, sigma_under, m_count);
          py::dict d;
          d["values"] = ladder.values;
          d["sum_inv_sq"] = ladder.sum_inv_sq;
          d["sum_inv_cube"] = ladder.sum_inv_cube;
          d["bound_inv_sq"] = ladder.bound_inv_sq;
          d["bound_inv_cube"] = ladder.bound_inv_cube;
          return d;
        },
        py::arg("n"), py::arg("eps"), py::arg("sigma_under"), py::arg("m"));
  m.def("proof_epsilon_choice",
        [](std::int64_t n, int p, double nu1, double nu3, double sigma_min,
           double sigma_under, double k) {
          return proof_epsilon_choice(BoundInputs{n, p, nu1, nu3, sigma_min, sigma_under, 1.0},
                                      k);
        },
        py::arg("n"), py::arg("p"), py::arg("nu1"), py::arg("nu3"),
        py::arg("sigma_min") = 1.0, py::arg("sigma_under") = 1.0, py::arg("k") = 1.0);

  // harness
  m.def("run_experiment",
        [](const std::string& config) {
          const auto cfg = ExperimentConfig::from_json(parse(config));
          return run_experiment(cfg).to_json().dump();
        },
        py::arg("config"),
        "Run an experiment from a JSON config string; returns the report as JSON.");
}
