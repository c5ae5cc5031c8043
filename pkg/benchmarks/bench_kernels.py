"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is run once to compile, then timed with ``timeit``; the two
backends are also checked to agree before timing.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from sparsespike import kernels
from sparsespike.oracle import _configurations
from sparsespike.priors import Prior
from sparsespike.scalar_channel import DEFAULT_QUAD


def _cases():
    prior = Prior.bernoulli_rademacher(0.01)
    values, log_probs = prior.atom_arrays()
    nodes, weights = DEFAULT_QUAD.rule
    snrs = np.logspace(-2, 4, 512)
    x = np.random.default_rng(0).standard_normal(100_000)
    configs, log_prior = _configurations(Prior.bernoulli(0.3), 12)
    W = np.random.default_rng(1).standard_normal((12, 12))
    W = np.triu(W, 1) + np.triu(W, 1).T
    pb = Prior.bernoulli(1e-3)
    vb, lb = pb.atom_arrays()
    return {
        "channel_terms (512 SNRs)": ("channel_terms", (values, log_probs, snrs, nodes, weights)),
        "posterior_moments (1e5 entries)": ("posterior_moments", (values, log_probs, 3.0, 2.0, x)),
        "se_iterate (rho=1e-3, w=0.3)": ("se_iterate", (vb, lb, 0.3e6, 0.0, 0.0, nodes, weights, 1e-12, 100_000)),
        "config_log_weights (n=12)": ("config_log_weights", (configs, log_prior, W, 2.0)),
    }


def _agree(a, b) -> float:
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    return max(float(np.max(np.abs(np.asarray(u, float) - np.asarray(v, float)))) for u, v in zip(a, b))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not kernels.NUMBA_AVAILABLE:
        print("numba is not installed; nothing to compare")
        return
    print(f"{'kernel':34s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s} {'max|diff|':>10s}")
    for label, (name, args_) in _cases().items():
        f_np = getattr(kernels, f"{name}_numpy")
        f_nb = getattr(kernels, f"{name}_numba")
        diff = _agree(f_np(*args_), f_nb(*args_))  # also compiles
        t_np = min(timeit.repeat(lambda: f_np(*args_), number=1, repeat=args.repeat))
        t_nb = min(timeit.repeat(lambda: f_nb(*args_), number=1, repeat=args.repeat))
        print(f"{label:34s} {1e3 * t_np:11.2f} {1e3 * t_nb:11.2f} {t_np / t_nb:8.1f} {diff:10.1e}")


if __name__ == "__main__":
    main()
