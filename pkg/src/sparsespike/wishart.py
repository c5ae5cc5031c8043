"""Two-variable inf-sup potential of the sparse spiked Wishart model.

    i_pot(qU, qV) = lam alpha / 2 (qU - rU)(qV - rV)
                    + I_U(lam alpha qV) + alpha I_V(lam qU)

with rU = E[U^2], rV = E[V^2]. The inner sup over qV is a concave problem
(the channel MI is concave in SNR), solved through its monotone derivative;
the outer inf over qU reuses the two-scale grid refinement of the Wigner
solver.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .potential import ThresholdNotFoundError, overlap_grid, refine_minimum
from .priors import Prior
from .scalar_channel import DEFAULT_QUAD, QuadratureSpec, channel_terms


class InnerMaximizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class WishartParams:
    prior_u: Prior
    prior_v: Prior
    alpha: float
    lam: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("aspect ratio alpha must be positive")
        if not self.lam >= 0:
            raise ValueError("lambda must be non-negative")
        if not self.prior_v.is_discrete:
            raise ValueError("the V prior must be sparse and discrete")

    @property
    def rho_u(self) -> float:
        """Upper end of the U overlap domain, E[U^2] (1 for a Gaussian U)."""
        return self.prior_u.second_moment

    @property
    def rho_v(self) -> float:
        return self.prior_v.second_moment

    def with_lambda(self, lam: float) -> "WishartParams":
        return WishartParams(self.prior_u, self.prior_v, self.alpha, float(lam))


def lambda_from_gamma_v(gamma, rho_v: float, alpha: float):
    """lam = sqrt(4 gamma |ln rho_V| / (alpha rho_V))."""
    return np.sqrt(4.0 * np.asarray(gamma, dtype=np.float64) * abs(math.log(rho_v)) / (alpha * rho_v))


def gamma_v_from_lambda(lam, rho_v: float, alpha: float):
    return np.asarray(lam, dtype=np.float64) ** 2 * alpha * rho_v / (4.0 * abs(math.log(rho_v)))


def _mi(prior, snr, quad):
    return channel_terms(prior, snr, quad)[0]


def _mmse(prior, snr, quad):
    return channel_terms(prior, snr, quad)[1]


def wishart_potential_value(params: WishartParams, q_u: float, q_v: float,
                            quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    if not (0.0 <= q_u <= params.rho_u):
        raise ValueError(f"q_u={q_u} outside [0, {params.rho_u}]")
    if not (0.0 <= q_v <= params.rho_v):
        raise ValueError(f"q_v={q_v} outside [0, {params.rho_v}]")
    return float(_potential_grid(params, np.array([q_u]), np.array([q_v]), quad)[0, 0])


def _potential_grid(params: WishartParams, q_u: np.ndarray, q_v: np.ndarray, quad) -> np.ndarray:
    """Potential on the outer product grid, shape (len(q_u), len(q_v))."""
    lam, alpha = params.lam, params.alpha
    iu = _mi(params.prior_u, lam * alpha * q_v, quad)
    iv = _mi(params.prior_v, lam * q_u, quad)
    cross = 0.5 * lam * alpha * np.outer(q_u - params.rho_u, q_v - params.rho_v)
    return cross + iu[None, :] + alpha * iv[:, None]


def inner_argmax(params: WishartParams, q_u: float, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """argmax over q_v of the potential at fixed q_u.

    The q_v-derivative is proportional to (q_u - rU) + mmse_U(lam alpha q_v),
    nonincreasing in q_v, so the maximiser is a boundary point or its root.
    """
    lam, alpha, rho_v = params.lam, params.alpha, params.rho_v
    if lam == 0.0:
        return 0.0

    def slope(q_v):
        return q_u - params.rho_u + float(_mmse(params.prior_u, lam * alpha * q_v, quad)[0])

    s0 = slope(0.0)
    if s0 <= 0.0:
        return 0.0
    s1 = slope(rho_v)
    if s1 >= 0.0:
        return rho_v
    try:
        return brentq(slope, 0.0, rho_v, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=300)
    except (RuntimeError, ValueError) as exc:  # pragma: no cover - bracket is guaranteed above
        raise InnerMaximizationError(str(exc)) from exc


def _outer_value(params: WishartParams, q_u: float, quad) -> tuple[float, float]:
    q_v = inner_argmax(params, q_u, quad)
    return float(_potential_grid(params, np.array([q_u]), np.array([q_v]), quad)[0, 0]), q_v


@dataclass(frozen=True)
class InfSupSolution:
    q_u_star: float
    q_v_star: float
    value: float


def solve_infsup(params: WishartParams, quad: QuadratureSpec = DEFAULT_QUAD) -> InfSupSolution:
    """inf over q_u in [0, rU] of sup over q_v in [0, rV] of the potential."""
    if params.lam == 0.0:
        return InfSupSolution(0.0, 0.0, 0.0)
    lam = params.lam
    grid = overlap_grid(params.rho_u)
    values = np.array([_outer_value(params, q, quad)[0] for q in grid])

    def fun(q):
        return _outer_value(params, q, quad)[0]

    def deriv(q):
        # envelope theorem: d/dq_u = lam alpha / 2 * (q_v* - rV + mmse_V(lam q_u))
        q_v = inner_argmax(params, q, quad)
        return q_v - params.rho_v + float(_mmse(params.prior_v, lam * q, quad)[0])

    q_u, value, _ = refine_minimum(fun, deriv, grid, values, params.rho_u)
    q_u = min(max(q_u, 0.0), params.rho_u)
    return InfSupSolution(q_u, inner_argmax(params, q_u, quad), value)


def infsup_grid_oracle(params: WishartParams, points: int = 2001, quad: QuadratureSpec = DEFAULT_QUAD,
                       q_u_max: float | None = None) -> float:
    """Brute-force min-max of the potential on a dense uniform 2-D grid."""
    q_u = np.linspace(0.0, params.rho_u if q_u_max is None else q_u_max, points)
    q_v = np.linspace(0.0, params.rho_v, points)
    return float(_potential_grid(params, q_u, q_v, quad).max(axis=1).min())


@dataclass(frozen=True)
class WishartRow:
    lam: float
    gamma_v: float
    q_u_star: float
    q_v_star: float
    value: float
    mmse_vv_norm: float
    mmse_uu_norm: float
    mmse_uv_norm: float


WISHART_CSV_COLUMNS = ("lambda", "gamma_v", "q_u_star", "q_v_star", "value",
                       "mmse_vv_norm", "mmse_uu_norm", "mmse_uv_norm")


def wishart_row(params: WishartParams, quad: QuadratureSpec = DEFAULT_QUAD) -> WishartRow:
    sol = solve_infsup(params, quad)
    ru, rv = params.rho_u, params.rho_v
    return WishartRow(
        lam=params.lam,
        gamma_v=float(gamma_v_from_lambda(params.lam, rv, params.alpha)) if rv < 1.0 else float("nan"),
        q_u_star=sol.q_u_star,
        q_v_star=sol.q_v_star,
        value=sol.value,
        mmse_vv_norm=1.0 - (sol.q_v_star / rv) ** 2,
        mmse_uu_norm=1.0 - (sol.q_u_star / ru) ** 2,
        mmse_uv_norm=1.0 - sol.q_u_star * sol.q_v_star / (ru * rv),
    )


def wishart_mmse(params: WishartParams, lambdas, quad: QuadratureSpec = DEFAULT_QUAD, pool=None) -> list[WishartRow]:
    """One row per lambda; ``params.lam`` is ignored."""
    lambdas = [float(v) for v in np.atleast_1d(lambdas)]
    if not lambdas:
        raise ValueError("empty lambda grid")
    mapper = map if pool is None else pool.map
    return list(mapper(wishart_row, [params.with_lambda(v) for v in lambdas], [quad] * len(lambdas)))


def wishart_csv_row(row: WishartRow) -> tuple:
    return (row.lam, row.gamma_v, row.q_u_star, row.q_v_star, row.value,
            row.mmse_vv_norm, row.mmse_uu_norm, row.mmse_uv_norm)


def v_threshold(prior_u: Prior, prior_v: Prior, alpha: float, quad: QuadratureSpec = DEFAULT_QUAD,
                window: tuple[float, float] = (0.1, 3.0), scan_points: int = 30, rtol: float = 1e-4) -> float:
    """gamma at which q_V*/rho_V crosses 1/2 in the sqrt(4 gamma |ln rV| / (alpha rV)) scaling."""
    rho_v = prior_v.second_moment
    base = WishartParams(prior_u, prior_v, alpha, 0.0)

    def informative(gamma):
        lam = float(lambda_from_gamma_v(gamma, rho_v, alpha))
        return solve_infsup(base.with_lambda(lam), quad).q_v_star / rho_v > 0.5

    scan = np.linspace(window[0], window[1], scan_points)
    flags = [informative(g) for g in scan]
    idx = next((i for i in range(1, len(scan)) if flags[i] and not flags[i - 1]), None)
    if idx is None:
        raise ThresholdNotFoundError("no jump of q_V*/rho_V across 1/2 in the scanned window")
    lo, hi = float(scan[idx - 1]), float(scan[idx])
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if informative(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
