"""Replica-symmetric potential of the sparse spiked Wigner model.

    i_pot(q, lam) = lam/4 (q - rho)^2 + I(X; sqrt(lam q) X + Z),   q in [0, rho]

Its infimum over q is the asymptotic mutual information per variable; the
minimiser q* gives the normalised matrix MMSE 1 - (q*/rho)^2. In the
statistical scaling lam = 4 gamma |ln rho| / rho the minimiser jumps from a
small-overlap branch to q* ~ rho at a threshold gamma_c close to 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .priors import Prior, PriorKind
from .scalar_channel import DEFAULT_QUAD, QuadratureSpec, channel_terms

GRID_POINTS = 512
GRID_DECADES = 12
N_CANDIDATES = 3


class ThresholdNotFoundError(RuntimeError):
    pass


def _require_discrete(prior: Prior):
    if not prior.is_discrete:
        raise ValueError("the Wigner potential needs a finite-support prior; got a Gaussian")


def lambda_from_gamma(gamma, rho: float):
    """Statistical scaling lam = 4 gamma |ln rho| / rho."""
    return 4.0 * np.asarray(gamma, dtype=np.float64) * abs(math.log(rho)) / rho


def gamma_from_lambda(lam, rho: float):
    return np.asarray(lam, dtype=np.float64) * rho / (4.0 * abs(math.log(rho)))


def _values(prior: Prior, qs: np.ndarray, lam: float, quad: QuadratureSpec):
    rho = prior.second_moment
    mi = channel_terms(prior, lam * qs, quad)[0]
    return 0.25 * lam * (qs - rho) ** 2 + mi


def potential_value(prior: Prior, q: float, lam: float, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    _require_discrete(prior)
    rho = prior.second_moment
    if not (0.0 <= q <= rho):
        raise ValueError(f"overlap q={q} outside [0, {rho}]")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    return float(_values(prior, np.array([float(q)]), float(lam), quad)[0])


def potential_value_bernoulli(q: float, lam: float, rho: float, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Bernoulli potential written out explicitly.

    lam (q^2 + rho^2)/4 - (1-rho) E ln{1-rho+rho e^{-a/2+sqrt(a) Z}}
                        - rho E ln{1-rho+rho e^{a/2+sqrt(a) Z}},  a = lam q
    Independent of the generic atom-sum route; used to cross-check it.
    """
    if not (0.0 <= q <= rho):
        raise ValueError(f"overlap q={q} outside [0, {rho}]")
    a = lam * q
    z, w = quad.rule
    l0 = math.log1p(-rho) if rho < 1.0 else -np.inf
    lr = math.log(rho)
    off = np.logaddexp(l0, lr - 0.5 * a + math.sqrt(a) * z)
    on = np.logaddexp(l0, lr + 0.5 * a + math.sqrt(a) * z)
    return float(0.25 * lam * (q * q + rho * rho) - (1.0 - rho) * (w @ off) - rho * (w @ on))


def stationarity_residual(prior: Prior, q: float, lam: float, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """q - (rho - mmse(lam q)); zero at interior critical points of the potential."""
    rho = prior.second_moment
    return float(q - rho + channel_terms(prior, lam * q, quad)[1][0])


@dataclass(frozen=True)
class PotentialMinimum:
    q_star: float
    i_min: float
    interior: bool


def overlap_grid(upper: float, points: int = GRID_POINTS, decades: int = GRID_DECADES) -> np.ndarray:
    """{0} plus a log-spaced grid over [upper * 10^-decades, upper]."""
    return np.concatenate([[0.0], np.logspace(math.log10(upper) - decades, math.log10(upper), points)])


def refine_minimum(fun, deriv, grid: np.ndarray, values: np.ndarray, scale: float,
                   candidates: int = N_CANDIDATES):
    """Refine the best local minima of ``fun`` found on ``grid``.

    ``deriv`` (up to a positive factor) is polished to zero with brentq when it
    changes sign across the bracket; otherwise a bounded Brent search is
    kept. Returns (x, value, interior); exact ties go to the smaller x.
    """
    m = len(grid)
    local = [i for i in range(m)
             if (i == 0 or values[i] <= values[i - 1]) and (i == m - 1 or values[i] <= values[i + 1])]
    local.sort(key=lambda i: (values[i], grid[i]))
    best = None
    for i in local[:candidates]:
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, m - 1)]
        x, v, interior = grid[i], values[i], False
        d_lo, d_mid, d_hi = deriv(lo), deriv(grid[i]), deriv(hi)
        # a sign change - to + in either half-bracket marks an interior minimum
        if d_lo < 0.0 < d_mid:
            bracket = (lo, grid[i])
        elif d_mid < 0.0 < d_hi:
            bracket = (grid[i], hi)
        elif d_lo < 0.0 < d_hi and lo < grid[i] < hi:
            bracket = (lo, hi)
        else:
            bracket = None
        if bracket is not None:
            x = brentq(deriv, *bracket, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=200)
            v, interior = fun(x), True
        elif hi > lo:
            res = minimize_scalar(lambda u: fun(u * scale), bounds=(lo / scale, hi / scale),
                                  method="bounded", options={"xatol": 1e-13})
            if res.fun < v:
                x, v = res.x * scale, res.fun
                interior = lo < x < hi
        cand = (v, x, interior)
        if best is None or v < best[0] or (v == best[0] and x < best[1]):
            best = cand
    v, x, interior = best
    return float(x), float(v), bool(interior)


def minimize_potential(prior: Prior, lam: float, quad: QuadratureSpec = DEFAULT_QUAD) -> PotentialMinimum:
    """Global minimiser of the potential over q in [0, rho]."""
    _require_discrete(prior)
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    if lam == 0.0:
        return PotentialMinimum(0.0, 0.0, False)
    rho = prior.second_moment
    grid = overlap_grid(rho)
    values = _values(prior, grid, lam, quad)

    def fun(q):
        return float(_values(prior, np.array([q]), lam, quad)[0])

    def deriv(q):
        return stationarity_residual(prior, q, lam, quad)

    q, v, interior = refine_minimum(fun, deriv, grid, values, rho)
    return PotentialMinimum(min(max(q, 0.0), rho), v, interior)


@dataclass(frozen=True)
class PotentialRow:
    gamma: float
    lam: float
    q_star: float
    i_pot_min: float
    mi_rescaled: float
    mmse_matrix_norm: float


@dataclass
class PotentialCurve:
    rho: float
    rows: list[PotentialRow] = field(default_factory=list)

    CSV_COLUMNS = ("gamma", "lambda", "rho", "q_star", "i_pot_min", "mi_rescaled", "mmse_matrix_norm")

    def csv_rows(self):
        for r in self.rows:
            yield (r.gamma, r.lam, self.rho, r.q_star, r.i_pot_min, r.mi_rescaled, r.mmse_matrix_norm)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])


def potential_row(prior: Prior, gamma: float, quad: QuadratureSpec = DEFAULT_QUAD) -> PotentialRow:
    rho = prior.rho
    lam = float(lambda_from_gamma(gamma, rho))
    res = minimize_potential(prior, lam, quad)
    return PotentialRow(
        gamma=float(gamma),
        lam=lam,
        q_star=res.q_star,
        i_pot_min=res.i_min,
        mi_rescaled=res.i_min / (rho * abs(math.log(rho))),
        mmse_matrix_norm=1.0 - (res.q_star / rho) ** 2,
    )


def mmse_curve(prior: Prior, gammas, quad: QuadratureSpec = DEFAULT_QUAD, pool=None) -> PotentialCurve:
    """Minimise the potential along a gamma grid (lam = 4 gamma |ln rho| / rho).

    ``pool`` may be any executor with an order-preserving ``map``.
    """
    _require_discrete(prior)
    gammas = [float(g) for g in np.atleast_1d(gammas)]
    if not gammas:
        raise ValueError("empty gamma grid")
    if any(b < a for a, b in zip(gammas, gammas[1:])):
        raise ValueError("gamma grid must be sorted ascending")
    if prior.rho >= 1.0:
        raise ValueError("the statistical scaling needs rho < 1")
    mapper = map if pool is None else pool.map
    rows = list(mapper(potential_row, [prior] * len(gammas), gammas, [quad] * len(gammas)))
    return PotentialCurve(prior.rho, rows)


potential_curve = mmse_curve


@dataclass(frozen=True)
class StatisticalThreshold:
    lambda_c: float
    gamma_c: float
    reference_lambda: float

    @property
    def normalized(self) -> float:
        """lambda_c / (4 |ln rho| / rho)."""
        return self.lambda_c / self.reference_lambda


def statistical_threshold(prior: Prior, quad: QuadratureSpec = DEFAULT_QUAD,
                          window: tuple[float, float] = (0.1, 3.0), scan_points: int = 30,
                          rtol: float = 1e-4) -> StatisticalThreshold:
    """Locate where q*/rho crosses 1/2, by scan then bisection in gamma."""
    _require_discrete(prior)
    rho = prior.rho
    if not rho < 0.5:
        raise ValueError("threshold search requires rho < 0.5")

    def informative(gamma):
        lam = float(lambda_from_gamma(gamma, rho))
        return minimize_potential(prior, lam, quad).q_star / rho > 0.5

    scan = np.linspace(window[0], window[1], scan_points)
    flags = [informative(g) for g in scan]
    idx = next((i for i in range(1, len(scan)) if flags[i] and not flags[i - 1]), None)
    if idx is None:
        raise ThresholdNotFoundError(
            f"no jump of q*/rho across 1/2 for gamma in [{window[0]}, {window[1]}] ({prior})")
    lo, hi = float(scan[idx - 1]), float(scan[idx])
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if informative(mid):
            hi = mid
        else:
            lo = mid
    gamma_c = 0.5 * (lo + hi)
    ref = 4.0 * abs(math.log(rho)) / rho
    return StatisticalThreshold(lambda_c=gamma_c * ref, gamma_c=gamma_c, reference_lambda=ref)


def asymptotic_limit(gamma: float) -> float:
    """Rescaled mutual information in the rho -> 0 limit: min(gamma, 1)."""
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    return min(float(gamma), 1.0)


def _is_bernoulli(prior: Prior) -> bool:
    return prior.kind is PriorKind.BERNOULLI
