"""Battery of oracle checks behind ``sparsespike validate``."""
from __future__ import annotations

import numpy as np

from .oracle import CheckResult, check_immse, check_nishimori, posterior_table
from .amp import noise_matrix
from .potential import lambda_from_gamma, minimize_potential, potential_value, potential_value_bernoulli, \
    stationarity_residual
from .priors import Prior, sample
from .scalar_channel import DEFAULT_QUAD, QuadratureSpec, channel_terms
from .state_evolution import se_step, se_step_bernoulli

SAMPLES = {"quick": {"nishimori": 2000, "immse": 1000}, "full": {"nishimori": 10_000, "immse": 4000}}

SCALAR_IMMSE_RTOL = 1e-5
STATIONARITY_TOL = 1e-8
NORMALIZATION_TOL = 1e-12
CLOSED_FORM_TOL = 1e-10


def scalar_immse_error(prior: Prior, gammas, quad: QuadratureSpec = DEFAULT_QUAD, rel_step: float = 1e-4) -> float:
    """max over gammas of |dI/dgamma - mmse/2| / (mmse/2), central differences."""
    g = np.asarray(gammas, dtype=np.float64)
    h = rel_step * g
    i_hi = channel_terms(prior, g + h, quad)[0]
    i_lo = channel_terms(prior, g - h, quad)[0]
    half = 0.5 * channel_terms(prior, g, quad)[1]
    return float(np.max(np.abs((i_hi - i_lo) / (2 * h) - half) / half))


def stationarity_error(prior: Prior, gammas, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """max |q* - rho + mmse(lam q*)| / rho over interior minimisers."""
    worst = 0.0
    for gamma in gammas:
        lam = float(lambda_from_gamma(gamma, prior.rho))
        res = minimize_potential(prior, lam, quad)
        if res.interior:
            worst = max(worst, abs(stationarity_residual(prior, res.q_star, lam, quad)) / prior.rho)
    return worst


def run_checks(level: str = "quick", seed: int = 0, quad: QuadratureSpec = DEFAULT_QUAD) -> list[CheckResult]:
    n_mc = SAMPLES[level]
    out: list[CheckResult] = []

    out += check_nishimori(Prior.bernoulli(0.3), 6, 1.0, n_mc["nishimori"], seed)

    im = check_immse(Prior.bernoulli(0.3), 8, 2.0, n_mc["immse"], seed)
    out.append(CheckResult("immse_exact", im.gap, im.combined_std_error, im.passed()))

    gammas = np.logspace(-2, 1, 20)
    err = max(scalar_immse_error(p, gammas, quad) for p in (Prior.bernoulli(0.1), Prior.bernoulli_rademacher(0.1)))
    out.append(CheckResult("scalar_immse", err, 0.0, err <= SCALAR_IMMSE_RTOL))

    off = (0.3, 0.6, 1.6, 2.5)
    err = max(stationarity_error(p, off, quad)
              for p in (Prior.bernoulli(1e-4), Prior.bernoulli_rademacher(1e-4), Prior.bernoulli(1e-8)))
    out.append(CheckResult("potential_stationarity", err, 0.0, err <= STATIONARITY_TOL))

    worst = 0.0
    for s in range(5):
        p = Prior.bernoulli_rademacher(0.3) if s % 2 else Prior.bernoulli(0.3)
        W = noise_matrix(7, seed + s) + np.sqrt(3.0 / 7) * np.outer(*(2 * [sample(p, 7, seed + s)]))
        np.fill_diagonal(W, 0.0)
        worst = max(worst, posterior_table(p, W, 3.0).normalization_residual)
    out.append(CheckResult("posterior_normalization", worst, 0.0, worst <= NORMALIZATION_TOL))

    worst = 0.0
    for rho in (1e-3, 0.05, 0.3):
        pb = Prior.bernoulli(rho)
        for lam in (0.5, 20.0, 1e3):
            for tau in (rho**2, 0.5 * rho, rho):
                worst = max(worst, abs(se_step(pb, lam, tau, quad) - se_step_bernoulli(lam, rho, tau, quad)) / rho)
                q = 0.5 * tau
                worst = max(worst, abs(potential_value(pb, q, lam, quad)
                                       - potential_value_bernoulli(q, lam, rho, quad)) / max(rho, 1e-300))
    out.append(CheckResult("bernoulli_closed_forms", worst, 0.0, worst <= CLOSED_FORM_TOL))
    return out
