import json
import math

import numpy as np
import pytest

hdclt = pytest.importorskip("hdclt")


def test_version_and_rng_id():
    assert hdclt.__version__
    assert hdclt.rng_id == "philox4x32-10"


def test_min_eigenvalue_and_split():
    assert hdclt.min_eigenvalue(np.eye(3)) == pytest.approx(1.0)
    sigma = np.array([[2.0, 1.0], [1.0, 2.0]])
    assert hdclt.min_eigenvalue(sigma) == pytest.approx(1.0, abs=1e-9)
    lam, remainder = hdclt.gaussian_split(sigma)
    assert lam == pytest.approx(1.0, abs=1e-9)
    assert remainder[0][1] == pytest.approx(1.0)
    f = hdclt.factor_for_sampling(sigma)
    assert np.allclose(f @ f.T, sigma, atol=1e-9)


def test_sampling_is_deterministic():
    spec = json.dumps({"family": "spike13", "p": 3, "gamma": 4.0})
    a = hdclt.sample(spec, 32, seed=7, stream_id=1)
    b = hdclt.sample(spec, 32, seed=7, stream_id=1)
    assert a.shape == (32, 3)
    assert np.array_equal(a, b)
    c = hdclt.sample(spec, 32, seed=7, stream_id=2)
    assert not np.array_equal(a, c)


def test_exact_covariance():
    spec = json.dumps({"family": "spike13", "p": 2, "gamma": 8.0})
    cov = hdclt.exact_covariance(spec)
    assert cov[1][1] == pytest.approx(0.5)


def test_spike_zero_probability():
    assert hdclt.spike_zero_probability(2, 2.0) == pytest.approx(0.375)
    assert hdclt.spike_zero_probability(10, 10.0) >= 0.9**10


def test_oracle_mu():
    rad = json.dumps(
        {"dim": 1, "atoms": [{"point": [-1.0], "mass": 0.5}, {"point": [1.0], "mass": 0.5}]}
    )
    delta = json.dumps({"dim": 1, "atoms": [{"point": [0.0], "mass": 1.0}]})
    assert hdclt.exact_mu_atomic(rad, delta) == pytest.approx(0.5)
    value, gap = hdclt.exact_mu_atomic_vs_gaussian(rad, np.array([1.0]))
    assert value == pytest.approx(0.3413447460685429, abs=1e-9)
    assert gap > 0
    assert hdclt.exact_pseudo_moment(
        json.dumps({"dim": 1, "atoms": [{"point": [1.0], "mass": 1.0}]}),
        json.dumps({"dim": 1, "atoms": [{"point": [2.0], "mass": 1.0}]}),
        3,
    ) == pytest.approx(9.0)


def test_bounds():
    value = hdclt.theorem1_rhs(n=100, p=1, nu1=1.0, nu3=1.0)
    assert value == pytest.approx(1.1136987000824332, rel=1e-12)
    assert hdclt.lopes_rhs(1.0, 1.0, 1, 1) == 0.0
    assert hdclt.nazarov_rhs(1.0, 1, 0.1) == pytest.approx(0.1)
    assert hdclt.phi_eps(np.zeros(2), np.zeros(2), 1.0) == pytest.approx(0.25)
    ladder = hdclt.epsilon_ladder(100, 0.5, 1.0, 50)
    assert ladder["sum_inv_sq"] <= ladder["bound_inv_sq"] + 1e-12
    assert ladder["sum_inv_cube"] <= ladder["bound_inv_cube"] + 1e-12


def test_rate_fit():
    fit = hdclt.rate_fit([(4.0, 0.5), (16.0, 0.25), (64.0, 0.125)])
    assert fit["slope"] == pytest.approx(-0.5)


def test_run_experiment_bound_eval():
    report = json.loads(
        hdclt.run_experiment(
            json.dumps(
                {
                    "experiment": "bound_eval",
                    "bound_eval": {
                        "formula": "theorem1",
                        "n": 100,
                        "p": 1,
                        "nu1": 1.0,
                        "nu3": 1.0,
                        "sigma_min": 1.0,
                        "sigma_under": 1.0,
                        "c": 1.0,
                    },
                }
            )
        )
    )
    assert report["pass"] is True
    assert report["results"]["value"] == pytest.approx(1.1136987000824332)
    assert report["meta"]["rng"] == "philox4x32-10"


def test_mu_hat_between():
    spec_u = json.dumps({"family": "product", "coordinates": ["rademacher"]})
    spec_v = json.dumps({"family": "gaussian", "covariance": [[1.0]]})
    est = hdclt.mu_hat_between(spec_u, spec_v, n=1, count=20000, seed=3)
    assert abs(est["value"] - 0.3413) < 0.03
    assert est["ci"][0] <= est["value"] <= est["ci"][1]
