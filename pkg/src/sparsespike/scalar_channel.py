"""Effective scalar Gaussian channel y = sqrt(gamma) X + Z.

Mutual information, MMSE and the Bayes denoiser with its derivative. The
denoiser is parameterised by (mu, tau) as in y = mu X + sqrt(tau) Z; the SNR
form maps onto it with mu = tau = gamma (so mu^2 / tau = gamma).

Expectations over Z use a composite Gauss-Legendre rule on
[-half_width, half_width] against the explicit standard normal density.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import expit

from . import kernels
from .priors import Prior, PriorKind, moments

PANEL_ORDER = 20


@dataclass(frozen=True)
class QuadratureSpec:
    node_count: int = 2000
    half_width: float = 10.0

    def __post_init__(self):
        if int(self.node_count) < 16:
            raise ValueError("quadrature needs at least 16 nodes")
        if not self.half_width >= 6.0:
            raise ValueError("quadrature half_width must be at least 6")

    @property
    def rule(self) -> tuple[np.ndarray, np.ndarray]:
        """(nodes, weights) with the N(0,1) density folded into the weights."""
        return _normal_rule(int(self.node_count), float(self.half_width))

    @classmethod
    def from_config(cls, cfg: dict | None) -> "QuadratureSpec":
        cfg = cfg or {}
        return cls(int(cfg.get("nodes", 2000)), float(cfg.get("half_width", 10.0)))


DEFAULT_QUAD = QuadratureSpec()


@lru_cache(maxsize=16)
def _normal_rule(node_count: int, half_width: float):
    panels = max(1, node_count // PANEL_ORDER)
    # spread the node budget over the panels; orders differ by at most one
    orders = [node_count // panels + (1 if i < node_count % panels else 0) for i in range(panels)]
    edges = np.linspace(-half_width, half_width, panels + 1)
    nodes, weights = [], []
    for (a, b), order in zip(zip(edges[:-1], edges[1:]), orders):
        x, w = np.polynomial.legendre.leggauss(order)
        nodes.append(0.5 * (a + b) + 0.5 * (b - a) * x)
        weights.append(0.5 * (b - a) * w)
    z = np.concatenate(nodes)
    w = np.concatenate(weights) * np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    z.setflags(write=False)
    w.setflags(write=False)
    return z, w


def _check_gamma(gamma):
    gamma = float(gamma)
    if not math.isfinite(gamma):
        raise ValueError(f"SNR must be finite, got {gamma}")
    if gamma < 0:
        raise ValueError(f"SNR must be non-negative, got {gamma}")
    return gamma


def _check_snrs(gammas) -> np.ndarray:
    g = np.atleast_1d(np.asarray(gammas, dtype=np.float64))
    if not np.all(np.isfinite(g)):
        raise ValueError("SNR must be finite")
    if np.any(g < 0):
        raise ValueError("SNR must be non-negative")
    return g


def channel_terms(prior: Prior, gammas, quad: QuadratureSpec = DEFAULT_QUAD):
    """Vectorised (mutual_info, mmse, power) over an array of SNRs.

    ``power`` is E[E[X|y]^2] = E[X^2] - mmse, computed directly so that it keeps
    full relative precision when it is much smaller than E[X^2].
    """
    g = _check_snrs(gammas)
    if prior.kind is PriorKind.GAUSSIAN:
        mmse = 1.0 / (1.0 + g)
        return 0.5 * np.log1p(g), mmse, g / (1.0 + g)
    values, log_probs = prior.atom_arrays()
    nodes, weights = quad.rule
    e_lse, mmse, power = kernels.channel_terms(values, log_probs, g, nodes, weights)
    mi = 0.5 * g * prior.second_moment - e_lse
    mi[g == 0.0] = 0.0
    return np.maximum(mi, 0.0), mmse, power


def mutual_info(prior: Prior, gamma: float, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """I(X; sqrt(gamma) X + Z) in nats."""
    gamma = _check_gamma(gamma)
    if gamma == 0.0:
        return 0.0
    return float(channel_terms(prior, gamma, quad)[0][0])


def mmse(prior: Prior, gamma: float, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    gamma = _check_gamma(gamma)
    if gamma == 0.0:
        return moments(prior)[2]
    return float(channel_terms(prior, gamma, quad)[1][0])


def _check_tau(tau):
    if not tau > 0:
        raise ValueError(f"noise variance tau must be positive, got {tau}")


def posterior_moments(prior: Prior, mu: float, tau: float, x):
    """Posterior mean and variance of X given mu X + sqrt(tau) Z = x."""
    _check_tau(tau)
    x = np.asarray(x, dtype=np.float64)
    if prior.kind is PriorKind.GAUSSIAN:
        denom = mu * mu + tau
        return mu * x / denom, np.full_like(x, tau / denom)
    values, log_probs = prior.atom_arrays()
    return kernels.posterior_moments(values, log_probs, mu, tau, x)


def denoise(prior: Prior, mu: float, tau: float, x):
    """Bayes denoiser E[X | mu X + sqrt(tau) Z = x], elementwise."""
    mean = posterior_moments(prior, mu, tau, x)[0]
    return float(mean) if np.ndim(mean) == 0 else mean


def denoise_deriv(prior: Prior, mu: float, tau: float, x):
    """d/dx of the denoiser: (mu / tau) Var(X | y = x)."""
    _check_tau(tau)
    var = posterior_moments(prior, mu, tau, x)[1]
    out = (mu / tau) * var
    return float(out) if np.ndim(out) == 0 else out


def denoise_snr(prior: Prior, gamma: float, y):
    """E[X | sqrt(gamma) X + Z = y], through the mu = tau = gamma channel at sqrt(gamma) y."""
    gamma = _check_gamma(gamma)
    if gamma == 0.0:
        mean = np.full_like(np.asarray(y, dtype=np.float64), moments(prior)[0])
        return float(mean) if mean.ndim == 0 else mean
    return denoise(prior, gamma, gamma, math.sqrt(gamma) * np.asarray(y, dtype=np.float64))


def denoise_bernoulli(rho: float, mu: float, tau: float, x):
    """Closed-form Bernoulli denoiser rho / ((1-rho) exp(mu^2/(2 tau) - mu x/tau) + rho)."""
    _check_tau(tau)
    x = np.asarray(x, dtype=np.float64)
    if rho >= 1.0:
        out = np.ones_like(x)
    else:
        out = expit(math.log(rho) - math.log1p(-rho) + (mu / tau) * x - mu * mu / (2.0 * tau))
    return float(out) if out.ndim == 0 else out


def denoise_deriv_bernoulli(rho: float, mu: float, tau: float, x):
    f = denoise_bernoulli(rho, mu, tau, x)
    return (mu / tau) * f * (1.0 - f)
