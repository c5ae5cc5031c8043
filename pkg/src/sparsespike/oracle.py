"""Exact small-n references by exhaustive enumeration of the posterior.

For a Wigner instance the posterior weight of a configuration x is

    P(x) exp(-H(x)),  H(x) = sum_{i<j} [lam x_i^2 x_j^2 / (2n) - sqrt(lam/n) x_i x_j W_ij].

Monte Carlo enters only through the outer average over instances; every inner
posterior expectation is exact.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp

from . import kernels
from .amp import Instance, generate_instance, noise_matrix
from .priors import Prior, sample

MAX_N = {2: 14, 3: 9}


class EnumerationLimitError(ValueError):
    pass


class Estimate(NamedTuple):
    value: float
    std_error: float


def _limit(prior: Prior, n: int):
    if not prior.is_discrete:
        raise EnumerationLimitError("enumeration needs a discrete prior")
    k = len(prior.atoms)
    cap = MAX_N.get(k, 0)
    if n > cap:
        raise EnumerationLimitError(f"n={n} exceeds the enumeration limit {cap} for {k}-point support")
    if n < 1:
        raise EnumerationLimitError("n must be positive")


@lru_cache(maxsize=32)
def _configurations(prior: Prior, n: int):
    values, log_probs = prior.atom_arrays()
    idx = np.array(list(itertools.product(range(len(values)), repeat=n)), dtype=np.intp).reshape(-1, n)
    configs = np.ascontiguousarray(values[idx])
    log_prior = log_probs[idx].sum(axis=1)
    configs.setflags(write=False)
    log_prior.setflags(write=False)
    return configs, log_prior


@dataclass(frozen=True, eq=False)
class PosteriorTable:
    configurations: np.ndarray
    log_weights: np.ndarray  # normalised
    log_partition: float  # ln of sum_x P(x) exp(-H(x))
    marginal_means: np.ndarray
    pair_means: np.ndarray  # <x_i x_j>, diagonal included

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def normalization_residual(self) -> float:
        return abs(float(logsumexp(self.log_weights)))


def posterior_table(prior: Prior, W: np.ndarray, lam: float) -> PosteriorTable:
    n = W.shape[0]
    _limit(prior, n)
    configs, log_prior = _configurations(prior, n)
    lw = kernels.config_log_weights(configs, log_prior, np.ascontiguousarray(W, dtype=np.float64), float(lam))
    log_z = float(logsumexp(lw))
    lw = lw - log_z
    p = np.exp(lw)
    means = p @ configs
    pairs = (configs * p[:, None]).T @ configs
    return PosteriorTable(configs, lw, log_z, means, pairs)


def exact_posterior(instance: Instance, lam: float | None = None) -> PosteriorTable:
    """Posterior table of an instance; ``lam`` overrides the SNR the posterior assumes."""
    return posterior_table(instance.prior, instance.W, instance.lam if lam is None else lam)


def _sample_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, np.uint64)[0])


def _observation(X, Z, lam):
    n = X.size
    W = Z + math.sqrt(lam / n) * np.outer(X, X)
    np.fill_diagonal(W, 0.0)
    return W


def _draw(prior: Prior, n: int, seed: int, index: int):
    """(X, Z) for Monte Carlo sample ``index``; the same pair for any SNR."""
    s = _sample_seed(seed, index)
    return sample(prior, n, s, 0), noise_matrix(n, s)


@dataclass
class _SampleStats:
    free_energy: np.ndarray  # -(1/n) ln Z
    matrix_se: np.ndarray  # ||XX^T - <xx^T>||_F^2 / n^2
    matrix_se_expanded: np.ndarray  # (||X||^4 - 2 X^T<xx^T>X + ||<xx^T>||_F^2) / n^2
    planted_q2: np.ndarray  # <Q^2> = X^T <xx^T> X / n^2
    replica_q2: np.ndarray  # <Q_12^2> = ||<xx^T>||_F^2 / n^2
    x_norm4: np.ndarray  # ||X||^4 / n^2
    pair_se: np.ndarray  # sum_{i<j} (X_i X_j - <x_i x_j>)^2
    mean_sq: np.ndarray  # ||<x>||^2
    mean_dot: np.ndarray  # X . <x>


def _collect(prior: Prior, n: int, lam_true: float, n_samples: int, seed: int,
             lam_assumed: float | None = None) -> _SampleStats:
    _limit(prior, n)
    lam_post = lam_true if lam_assumed is None else lam_assumed
    cols = {k: np.empty(n_samples) for k in _SampleStats.__dataclass_fields__}
    iu = np.triu_indices(n, 1)
    for s in range(n_samples):
        X, Z = _draw(prior, n, seed, s)
        W = _observation(X, Z, lam_true)
        tab = posterior_table(prior, W, lam_post)
        P, m = tab.pair_means, tab.marginal_means
        XX = np.outer(X, X)
        xx = float(X @ X)
        xpx = float(X @ P @ X)
        pf = float(np.sum(P * P))
        cols["free_energy"][s] = -tab.log_partition / n
        cols["matrix_se"][s] = float(np.sum((XX - P) ** 2)) / n**2
        cols["matrix_se_expanded"][s] = (xx * xx - 2.0 * xpx + pf) / n**2
        cols["planted_q2"][s] = xpx / n**2
        cols["replica_q2"][s] = pf / n**2
        cols["x_norm4"][s] = xx * xx / n**2
        cols["pair_se"][s] = float(np.sum((XX[iu] - P[iu]) ** 2))
        cols["mean_sq"][s] = float(m @ m)
        cols["mean_dot"][s] = float(X @ m)
    return _SampleStats(**cols)


def _mean_se(a: np.ndarray) -> Estimate:
    n = a.size
    se = float(a.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
    return Estimate(float(a.mean()), se)


def _check_samples(n_samples: int, minimum: int = 2):
    if n_samples < minimum:
        raise ValueError(f"need at least {minimum} Monte Carlo samples")


def exact_matrix_mmse(prior: Prior, n: int, lam: float, n_samples: int, seed: int) -> Estimate:
    """(1/n^2) E||X X^T - <x x^T>||_F^2 with exact inner posteriors."""
    _check_samples(n_samples, 100)
    return _mean_se(_collect(prior, n, lam, n_samples, seed).matrix_se)


@dataclass(frozen=True)
class MatrixMMSEDetail:
    direct: Estimate
    expansion_max_abs_diff: float  # per-sample algebraic identity
    overlap_form: Estimate  # E||X||^4/n^2 - E<Q^2>, equal to ``direct`` in expectation
    rho_squared_form: float  # rho^2 - E<Q^2>, the large-n form
    off_diagonal: Estimate  # (2/n^2) sum_{i<j} E(X_i X_j - <x_i x_j>)^2


def matrix_mmse_detail(prior: Prior, n: int, lam: float, n_samples: int, seed: int) -> MatrixMMSEDetail:
    st = _collect(prior, n, lam, n_samples, seed)
    rho = prior.second_moment
    return MatrixMMSEDetail(
        direct=_mean_se(st.matrix_se),
        expansion_max_abs_diff=float(np.max(np.abs(st.matrix_se - st.matrix_se_expanded))),
        overlap_form=_mean_se(st.x_norm4 - st.planted_q2),
        rho_squared_form=float(rho * rho - st.planted_q2.mean()),
        off_diagonal=_mean_se(2.0 * st.pair_se / n**2),
    )


def exact_mutual_info(prior: Prior, n: int, lam: float, n_samples: int, seed: int) -> Estimate:
    """(1/n) I(X; W) = E[-(1/n) ln Z] + (n-1) E[X^2]^2 lam / (4n)."""
    _check_samples(n_samples)
    if n == 1:
        return Estimate(0.0, 0.0)
    st = _collect(prior, n, lam, n_samples, seed)
    est = _mean_se(st.free_energy)
    shift = (n - 1) * prior.second_moment**2 * lam / (4.0 * n)
    return Estimate(est.value + shift, est.std_error)


@dataclass(frozen=True)
class CheckResult:
    check: str
    value: float
    std_error: float
    passed: bool

    def to_json(self) -> dict:
        return {"check": self.check, "value": self.value, "std_error": self.std_error, "pass": self.passed}


def check_nishimori(prior: Prior, n: int, lam: float, n_samples: int, seed: int,
                    lam_assumed: float | None = None, n_sigma: float = 3.0) -> list[CheckResult]:
    """Residuals of two Nishimori consequences, in units where 0 is exact.

    first order:  E||<x>||^2 = E[X . <x>]                (divided by n)
    second order: E<Q_12^2> = E<Q^2>, replica vs planted overlap
    ``lam_assumed`` != ``lam`` gives a mismatched posterior (negative control).
    """
    _check_samples(n_samples)
    st = _collect(prior, n, lam, n_samples, seed, lam_assumed)
    first = _mean_se((st.mean_sq - st.mean_dot) / n)
    second = _mean_se(st.replica_q2 - st.planted_q2)
    out = []
    for name, est in (("nishimori_first_order", first), ("nishimori_second_order", second)):
        out.append(CheckResult(name, abs(est.value), est.std_error, abs(est.value) <= n_sigma * est.std_error))
    return out


@dataclass(frozen=True)
class IMMSECheck:
    derivative: Estimate  # central finite difference of (1/n) I in lam
    half_mmse: Estimate  # (1/2n^2) sum_{i<j} E(X_i X_j - <x_i x_j>)^2
    combined_std_error: float

    @property
    def gap(self) -> float:
        return abs(self.derivative.value - self.half_mmse.value)

    def passed(self, n_sigma: float = 3.0) -> bool:
        return self.gap <= n_sigma * self.combined_std_error


def check_immse(prior: Prior, n: int, lam: float, n_samples: int, seed: int, h: float = 0.05) -> IMMSECheck:
    """I-MMSE on the full model: d/dlam (1/n) I equals half the pairwise MMSE / n^2.

    The finite difference uses the same (X, Z) draws at lam - h and lam + h.
    """
    _check_samples(n_samples)
    if h <= 0 or lam - h < 0:
        raise ValueError("need 0 < h <= lam")
    lo = _collect(prior, n, lam - h, n_samples, seed)
    hi = _collect(prior, n, lam + h, n_samples, seed)
    mid = _collect(prior, n, lam, n_samples, seed)
    shift = (n - 1) * prior.second_moment**2 / (4.0 * n)  # d/dlam of the deterministic part
    fd = _mean_se((hi.free_energy - lo.free_energy) / (2.0 * h) + shift)
    half = _mean_se(mid.pair_se / (2.0 * n * n))
    return IMMSECheck(fd, half, math.hypot(fd.std_error, half.std_error))


def posterior_check_instance(prior: Prior, n: int, lam: float, seed: int) -> Instance:
    """Instance built with the same streams the Monte Carlo loops use for sample 0."""
    return generate_instance(prior, n, lam, _sample_seed(seed, 0))
