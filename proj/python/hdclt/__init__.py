"""Exact oracles, seeded Monte-Carlo estimators, and closed-form bound
evaluators for Gaussian approximation over rectangle classes.

The heavy lifting lives in the compiled ``_core`` module; this package
re-exports its functions. Distribution specs and atomic laws are passed
as JSON strings (see the README for the schemas).
"""

from ._core import (  # noqa: F401
    __version__,
    rng_id,
    min_eigenvalue,
    factor_for_sampling,
    gaussian_split,
    sample,
    normalized_sum,
    exact_covariance,
    spike_zero_probability,
    exact_mu_atomic,
    exact_mu_atomic_vs_gaussian,
    exact_pseudo_moment,
    convolve,
    mu_hat_between,
    rate_fit,
    theorem1_rhs,
    lopes_rhs,
    nazarov_rhs,
    phi_eps,
    normal_quantile,
    epsilon_ladder,
    proof_epsilon_choice,
    run_experiment,
)
