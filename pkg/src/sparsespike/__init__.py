"""Sparse spiked Wigner/Wishart models: potentials, state evolution, AMP and exact oracles."""
from .priors import Prior, PriorKind, moments, sample
from .scalar_channel import QuadratureSpec, denoise, denoise_deriv, mmse, mutual_info

__version__ = "0.1.0"

__all__ = [
    "Prior",
    "PriorKind",
    "QuadratureSpec",
    "denoise",
    "denoise_deriv",
    "mmse",
    "moments",
    "mutual_info",
    "sample",
    "__version__",
]
