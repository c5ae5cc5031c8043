"""Signal laws for the sparse spiked models.

Discrete priors carry their atoms explicitly; the non-zero part always has unit
second moment, so E[X^2] = rho for the sparse kinds and 1 for the Gaussian.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class PriorKind(str, Enum):
    BERNOULLI = "bernoulli"
    BERNOULLI_RADEMACHER = "bernoulli_rademacher"
    GAUSSIAN = "gaussian"


class EmptyRequestError(ValueError):
    pass


@dataclass(frozen=True)
class Prior:
    kind: PriorKind
    rho: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", PriorKind(self.kind))
        if self.kind is PriorKind.GAUSSIAN:
            object.__setattr__(self, "rho", 1.0)
            return
        rho = float(self.rho)
        if not (0.0 < rho <= 1.0):
            raise ValueError(f"sparsity rho must lie in (0, 1], got {self.rho!r}")
        object.__setattr__(self, "rho", rho)

    @classmethod
    def bernoulli(cls, rho: float) -> "Prior":
        return cls(PriorKind.BERNOULLI, rho)

    @classmethod
    def bernoulli_rademacher(cls, rho: float) -> "Prior":
        return cls(PriorKind.BERNOULLI_RADEMACHER, rho)

    @classmethod
    def gaussian(cls) -> "Prior":
        return cls(PriorKind.GAUSSIAN)

    @classmethod
    def from_config(cls, cfg: dict) -> "Prior":
        """Build from ``{"kind": ..., "rho": ...}``."""
        kind = PriorKind(cfg["kind"])
        if kind is PriorKind.GAUSSIAN:
            return cls.gaussian()
        return cls(kind, cfg["rho"])

    def to_config(self) -> dict:
        return {"kind": self.kind.value, "rho": self.rho}

    @property
    def is_discrete(self) -> bool:
        return self.kind is not PriorKind.GAUSSIAN

    @property
    def atoms(self) -> list[tuple[float, float]]:
        """(value, probability) pairs; zero-probability atoms are dropped."""
        rho = self.rho
        if self.kind is PriorKind.BERNOULLI:
            atoms = [(0.0, 1.0 - rho), (1.0, rho)]
        elif self.kind is PriorKind.BERNOULLI_RADEMACHER:
            atoms = [(-1.0, rho / 2), (0.0, 1.0 - rho), (1.0, rho / 2)]
        else:
            raise TypeError("the Gaussian prior has no atoms")
        return [(v, p) for v, p in atoms if p > 0.0]

    def atom_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Atom values and log-probabilities as float arrays (kernel input)."""
        vals = np.array([v for v, _ in self.atoms], dtype=np.float64)
        # log1p keeps ln(1 - rho) exact for tiny rho
        logp = []
        for v, p in self.atoms:
            if v == 0.0:
                logp.append(np.log1p(-self.rho))
            else:
                logp.append(np.log(p))
        return vals, np.array(logp, dtype=np.float64)

    @property
    def second_moment(self) -> float:
        return self.rho if self.is_discrete else 1.0

    def __str__(self):
        if self.kind is PriorKind.GAUSSIAN:
            return "gaussian"
        return f"{self.kind.value}(rho={self.rho:g})"


def moments(prior: Prior) -> tuple[float, float, float]:
    """Exact (mean, second moment, variance)."""
    if prior.kind is PriorKind.BERNOULLI:
        rho = prior.rho
        return rho, rho, rho * (1.0 - rho)
    if prior.kind is PriorKind.BERNOULLI_RADEMACHER:
        return 0.0, prior.rho, prior.rho
    return 0.0, 1.0, 1.0


def rng_for(seed: int, index: int = 0) -> np.random.Generator:
    """Generator keyed on (seed, index).

    The stream for a given pair never depends on how many other streams were
    drawn before it, so parallel sweeps are schedule independent.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def sample(prior: Prior, n: int, seed: int | np.random.Generator, index: int = 0) -> np.ndarray:
    """Draw ``n`` i.i.d. components.

    ``seed`` may be an integer (combined with ``index`` into a counter-based
    stream) or an existing Generator, which is consumed in place.
    """
    if n < 1:
        raise EmptyRequestError("sample size must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else rng_for(seed, index)
    if prior.kind is PriorKind.GAUSSIAN:
        return rng.standard_normal(n)
    u = rng.random(n)
    if prior.kind is PriorKind.BERNOULLI:
        return (u < prior.rho).astype(np.float64)
    # Bernoulli-Rademacher: support from the same uniform, sign from its position
    x = np.zeros(n)
    half = prior.rho / 2
    x[u < half] = -1.0
    x[(u >= half) & (u < prior.rho)] = 1.0
    return x
