"""n-dependent state evolution for AMP with Bayes-optimal denoisers.

With the conditional-expectation denoiser mu_t = sqrt(lam) tau_t, and

    tau_{t+1} = E[ E[X | sqrt(lam) tau_t X + sqrt(tau_t) Z]^2 ],

i.e. tau_{t+1} = E[f^2] for the scalar channel at SNR lam * tau_t. Thresholds
are reported in the algorithmic scaling w = lam rho^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .priors import Prior, PriorKind, moments
from .scalar_channel import DEFAULT_QUAD, QuadratureSpec, channel_terms

TOL = 1e-12
MAX_ITER = 100_000


class BracketError(RuntimeError):
    pass


def _check_prior(prior: Prior):
    if not prior.is_discrete:
        raise ValueError("state evolution here is defined for the sparse discrete priors")


def se_step(prior: Prior, lam: float, tau: float, quad: QuadratureSpec = DEFAULT_QUAD,
            mu: float | None = None) -> float:
    """One SE update. ``mu`` defaults to sqrt(lam) * tau (Bayes-optimal trajectory)."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    _check_prior(prior)
    snr = lam * tau if mu is None else (0.0 if tau == 0 else mu * mu / tau)
    if snr == 0.0:
        return moments(prior)[0] ** 2
    return float(channel_terms(prior, snr, quad)[2][0])


def se_step_bernoulli(lam: float, rho: float, tau: float, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Closed form  E{ rho^2 / (rho + (1-rho) exp(-lam tau/2 - sqrt(lam tau) Z)) }."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    from scipy.special import expit

    z, w = quad.rule
    a = lam * tau
    if rho >= 1.0:
        return 1.0
    logit = math.log(rho) - math.log1p(-rho) + 0.5 * a + math.sqrt(a) * z
    return float(rho * (w @ expit(logit)))


@dataclass(frozen=True)
class FixedPoint:
    tau_inf: float
    iterations: int
    converged: bool


def _start(prior: Prior, lam: float, tau0: float, init: str):
    """(snr, tau) feeding the first update."""
    if init == "ones":
        # f_0 = 1: tau_1 = ||1||^2/n = 1, mu_1 = sqrt(lam) E[X]
        mean = moments(prior)[0]
        return lam * mean * mean, 1.0
    if init != "zero":
        raise ValueError(f"unknown SE initialisation {init!r}")
    if tau0 < 0:
        raise ValueError("tau0 must be non-negative")
    return lam * tau0, tau0


def se_fixed_point(prior: Prior, lam: float, tau0: float = 0.0, tol: float = TOL, max_iter: int = MAX_ITER,
                   quad: QuadratureSpec = DEFAULT_QUAD, init: str = "zero") -> FixedPoint:
    """Iterate until |tau_{t+1} - tau_t| <= tol * tau_{t+1} or ``max_iter``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    _check_prior(prior)
    snr0, tau = _start(prior, lam, tau0, init)
    values, log_probs = prior.atom_arrays()
    nodes, weights = quad.rule
    tau_inf, it, conv, _ = kernels.se_iterate(values, log_probs, lam, snr0, tau, nodes, weights, tol, max_iter)
    return FixedPoint(float(tau_inf), int(it), bool(conv))


def se_trajectory(prior: Prior, lam: float, t_max: int, quad: QuadratureSpec = DEFAULT_QUAD,
                  init: str = "zero", tau0: float = 0.0, first: tuple[float, float] | None = None) -> np.ndarray:
    """tau_1 .. tau_{t_max}.

    ``first`` overrides the (mu_1, tau_1) pair, e.g. with the empirical
    <f_0, X>/n of an AMP run.
    """
    _check_prior(prior)
    taus = np.empty(t_max)
    if first is not None:
        mu, tau = first
    else:
        snr0, tau_start = _start(prior, lam, tau0, init)
        if init == "ones":
            mu, tau = math.sqrt(lam) * moments(prior)[0], 1.0
        else:
            tau = se_step(prior, lam, tau_start, quad)
            mu = math.sqrt(lam) * tau
    taus[0] = tau
    for t in range(1, t_max):
        tau = se_step(prior, lam, tau, quad, mu=mu)
        mu = math.sqrt(lam) * tau
        taus[t] = tau
    return taus


@dataclass(frozen=True)
class SERow:
    lam: float
    w: float
    tau_inf: float
    tau_over_rho: float
    vector_mse_norm: float
    matrix_mse_norm: float
    iterations: int


SE_CSV_COLUMNS = ("lambda", "w", "tau_inf", "tau_over_rho", "vector_mse_norm", "matrix_mse_norm", "iterations")


def se_row(prior: Prior, lam: float, quad: QuadratureSpec = DEFAULT_QUAD) -> SERow:
    rho = prior.second_moment
    fp = se_fixed_point(prior, lam, quad=quad)
    r = fp.tau_inf / rho
    return SERow(lam, lam * rho * rho, fp.tau_inf, r, 1.0 - r, 1.0 - r * r, fp.iterations)


def se_csv_row(row: SERow) -> tuple:
    return (row.lam, row.w, row.tau_inf, row.tau_over_rho, row.vector_mse_norm, row.matrix_mse_norm,
            row.iterations)


def amp_mse_curve(prior: Prior, lambdas, quad: QuadratureSpec = DEFAULT_QUAD, pool=None) -> list[SERow]:
    """Predicted asymptotic AMP errors, uninformed start, one row per lambda."""
    _check_prior(prior)
    lambdas = [float(v) for v in np.atleast_1d(lambdas)]
    if not lambdas:
        raise ValueError("empty lambda grid")
    mapper = map if pool is None else pool.map
    return list(mapper(se_row, [prior] * len(lambdas), lambdas, [quad] * len(lambdas)))


def informative_fixed_point(prior: Prior, lam: float, quad: QuadratureSpec = DEFAULT_QUAD,
                            tol: float = TOL, max_iter: int = MAX_ITER) -> bool:
    """Whether SE from tau_0 = 0 ends above rho/2.

    The Bernoulli recursion is monotone, so the first iterate above rho/2
    settles the answer and the run stops there.
    """
    rho = prior.second_moment
    values, log_probs = prior.atom_arrays()
    nodes, weights = quad.rule
    stop = 0.5 * rho if prior.kind is PriorKind.BERNOULLI else np.inf
    tau, _, _, above = kernels.se_iterate(values, log_probs, lam, 0.0, 0.0, nodes, weights, tol, max_iter, stop)
    return above or tau / rho > 0.5


@dataclass(frozen=True)
class AlgorithmicThreshold:
    lambda_amp: float
    w_star: float


def algorithmic_threshold(prior: Prior, quad: QuadratureSpec = DEFAULT_QUAD,
                          w_bracket: tuple[float, float] = (1e-3, 1e2), rtol: float = 1e-4) -> AlgorithmicThreshold:
    """Bisection in lam on tau_inf/rho crossing 1/2 (uninformed start)."""
    _check_prior(prior)
    rho = prior.second_moment
    if rho > 0.05:
        raise ValueError("algorithmic threshold search requires rho <= 0.05")
    lo, hi = (w / rho**2 for w in w_bracket)
    if informative_fixed_point(prior, lo, quad) or not informative_fixed_point(prior, hi, quad):
        raise BracketError(f"SE crossing not bracketed for lam rho^2 in {w_bracket} ({prior})")
    while hi - lo > rtol * hi:
        mid = math.sqrt(lo * hi)
        if informative_fixed_point(prior, mid, quad):
            hi = mid
        else:
            lo = mid
    lam = math.sqrt(lo * hi)
    return AlgorithmicThreshold(lam, lam * rho * rho)
