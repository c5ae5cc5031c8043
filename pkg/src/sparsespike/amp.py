"""Finite-n spiked Wigner instances and Bayes-optimal AMP.

    x^{t+1} = A f_t(x^t) - b_t f_{t-1}(x^{t-1}),   A = W / sqrt(n),
    b_t = mean(f_t'(x^t)),

with f_t the posterior-mean denoiser for the channel mu_t X + sqrt(tau_t) Z.
(mu_t, tau_t) come from state evolution started at
mu_1 = sqrt(lam) <f_0, X>/n, tau_1 = ||f_0||^2 / n.

W has a zero diagonal: only the pairs i < j are observed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .priors import Prior, PriorKind, rng_for, sample
from .scalar_channel import DEFAULT_QUAD, QuadratureSpec, posterior_moments
from .state_evolution import se_step

T_MAX = 200
EARLY_STOP_TOL = 1e-8
EARLY_STOP_WINDOW = 3

# stream indices under one 64-bit seed
_SIGNAL_STREAM = 0
_NOISE_STREAM = 1
_INIT_STREAM = 2


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Instance:
    n: int
    lam: float
    prior: Prior
    X: np.ndarray
    W: np.ndarray
    seed: int


def noise_matrix(n: int, seed: int) -> np.ndarray:
    """Symmetric N(0,1) noise with zero diagonal, drawn from the seed's noise stream."""
    W = np.triu(rng_for(seed, _NOISE_STREAM).standard_normal((n, n)), 1)
    W += W.T
    return W


def generate_instance(prior: Prior, n: int, lam: float, seed: int) -> Instance:
    """W_ij = sqrt(lam/n) X_i X_j + Z_ij for i < j, symmetrised, zero diagonal."""
    if n < 2:
        raise ValueError("an instance needs n >= 2")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    X = sample(prior, n, seed, _SIGNAL_STREAM)
    W = noise_matrix(n, seed)
    if lam > 0:
        W += math.sqrt(lam / n) * np.outer(X, X)
        np.fill_diagonal(W, 0.0)
    X.setflags(write=False)
    W.setflags(write=False)
    return Instance(n=n, lam=float(lam), prior=prior, X=X, W=W, seed=int(seed))


def empirical_mse(X, estimate, rho: float) -> tuple[float, float]:
    """(||X - est||^2 / (n rho), ||X X^T - est est^T||_F^2 / (n rho)^2)."""
    X = np.asarray(X, dtype=np.float64)
    est = np.asarray(estimate, dtype=np.float64)
    if X.shape != est.shape:
        raise ValueError(f"length mismatch: {X.shape} vs {est.shape}")
    n = X.size
    diff = X - est
    vec = float(diff @ diff) / (n * rho)
    xx, xe, ee = float(X @ X), float(X @ est), float(est @ est)
    mat = (xx * xx - 2.0 * xe * xe + ee * ee) / (n * rho) ** 2
    return vec, max(mat, 0.0)


@dataclass(frozen=True)
class SideInfo:
    """Initialisation x^0 = eps X + N(0, I), f_0 the Bayes denoiser of that channel.

    Stand-in for a spectral start when the prior has zero mean.
    """
    eps: float
    seed: int | None = None


@dataclass(frozen=True)
class AmpRecord:
    t: int
    overlap: float
    onsager: float
    vector_mse_norm: float
    matrix_mse_norm: float
    se_tau: float  # SE prediction of this row's overlap, tau_{t+1}


TRAJECTORY_CSV_COLUMNS = ("t", "overlap", "onsager", "vector_mse_norm", "matrix_mse_norm", "se_tau")


@dataclass
class AmpTrajectory:
    records: list[AmpRecord] = field(default_factory=list)
    final_estimate: np.ndarray | None = None
    rho: float = 1.0
    seed: int | None = None

    def csv_rows(self):
        for r in self.records:
            yield (r.t, r.overlap, r.onsager, r.vector_mse_norm, r.matrix_mse_norm, r.se_tau)

    @property
    def final(self) -> AmpRecord:
        return self.records[-1]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def se_matrix_mse(self) -> np.ndarray:
        """SE prediction 1 - (tau_{t+1}/rho)^2 for each row."""
        return 1.0 - (self.column("se_tau") / self.rho) ** 2


def _initial_estimate(instance: Instance, init) -> np.ndarray:
    if init == "ones":
        if instance.prior.kind is not PriorKind.BERNOULLI:
            raise ConfigurationError("the all-ones start needs a positive-mean (Bernoulli) signal; "
                                     "use SideInfo for zero-mean priors")
        return np.ones(instance.n)
    if isinstance(init, SideInfo):
        seed = instance.seed if init.seed is None else init.seed
        x0 = init.eps * instance.X + rng_for(seed, _INIT_STREAM).standard_normal(instance.n)
        return posterior_moments(instance.prior, init.eps, 1.0, x0)[0]
    raise ConfigurationError(f"unknown initialisation {init!r}")


def amp_run(instance: Instance, t_max: int = T_MAX, init="ones", quad: QuadratureSpec = DEFAULT_QUAD,
            onsager: bool = True, early_stop: bool = True) -> AmpTrajectory:
    """Run AMP on one instance and record each iteration against state evolution.

    ``onsager=False`` drops the memory term (a diagnostic, not a valid AMP).
    """
    if t_max < 1:
        raise ValueError("t_max must be at least 1")
    prior = instance.prior
    if not prior.is_discrete:
        raise ConfigurationError("AMP denoisers are defined for the sparse discrete priors")
    n, lam, X, W = instance.n, instance.lam, instance.X, instance.W
    rho = prior.second_moment
    scale = 1.0 / math.sqrt(n)
    sq_lam = math.sqrt(lam)

    f_prev = _initial_estimate(instance, init)
    mu = sq_lam * float(f_prev @ X) / n
    tau = float(f_prev @ f_prev) / n
    x = scale * (W @ f_prev)

    traj = AmpTrajectory(rho=rho, seed=instance.seed)
    f = f_prev
    for t in range(1, t_max + 1):
        f, var = posterior_moments(prior, mu, tau, x)
        b = (mu / tau) * float(var.mean()) if onsager else 0.0
        tau_next = se_step(prior, lam, tau, quad, mu=mu)
        vec, mat = empirical_mse(X, f, rho)
        traj.records.append(AmpRecord(t, float(f @ X) / n, b, vec, mat, tau_next))
        if early_stop and t > EARLY_STOP_WINDOW:
            recent = [r.matrix_mse_norm for r in traj.records[-EARLY_STOP_WINDOW - 1:]]
            if max(abs(a - c) for a, c in zip(recent[1:], recent[:-1])) < EARLY_STOP_TOL:
                break
        if t == t_max:
            break
        x = scale * (W @ f) - b * f_prev
        f_prev = f
        mu, tau = sq_lam * tau_next, tau_next
    traj.final_estimate = f
    return traj


def run_seed(prior: Prior, n: int, lam: float, seed: int, t_max: int = T_MAX, init="ones",
             quad: QuadratureSpec = DEFAULT_QUAD, onsager: bool = True) -> AmpTrajectory:
    """Generate one instance and run AMP on it (pool-friendly helper)."""
    inst = generate_instance(prior, n, lam, seed)
    return amp_run(inst, t_max, init, quad, onsager)
