"""Hot inner loops, each in a numba flavour and a vectorised numpy flavour.

The public names at the bottom of the module point at the numba versions when
numba imports and ``SPARSESPIKE_DISABLE_NUMBA`` is unset (or "0"); otherwise at
the numpy versions. Both flavours are importable directly for cross-checks and
benchmarks.

Scalar channel convention used throughout: y = sqrt(snr) * X + Z. For a true
atom v_k and noise z, the log posterior weight of atom v_j is

    log p_j - snr * v_j**2 / 2 + snr * v_k * v_j + sqrt(snr) * z * v_j

(up to a constant). ``lse`` below is the log of the sum of those weights.
"""
from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_AVAILABLE = numba is not None
_flag = os.environ.get("SPARSESPIKE_DISABLE_NUMBA", "0").strip().lower()
USE_NUMBA = NUMBA_AVAILABLE and _flag in ("", "0", "false", "no")
BACKEND = "numba" if USE_NUMBA else "numpy"


def _njit(fn):
    if numba is None:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


# ---------------------------------------------------------------------------
# scalar channel: E[lse], MMSE and E[f^2] for a batch of SNR values
# ---------------------------------------------------------------------------

def _lse_log1p(e):
    """log-sum-exp over the last axis as max + log1p(rest), exact for tiny rest."""
    idx = np.argmax(e, axis=-1)[..., None]
    m = np.take_along_axis(e, idx, axis=-1)
    ex = np.exp(e - m)
    np.put_along_axis(ex, idx, 0.0, axis=-1)
    return m[..., 0] + np.log1p(ex.sum(axis=-1))


def channel_terms_numpy(values, log_probs, snrs, nodes, weights):
    """Return (E[lse], mmse, power) arrays over ``snrs``.

    ``weights`` already include the standard normal density; ``power`` is
    E[E[X|y]^2].
    """
    snrs = np.atleast_1d(np.asarray(snrs, dtype=np.float64))
    probs = np.exp(log_probs)
    s = snrs[:, None, None, None]
    vk = values[None, :, None, None]
    vj = values[None, None, None, :]
    z = nodes[None, None, :, None]
    e = log_probs[None, None, None, :] - 0.5 * s * vj * vj + s * vk * vj + np.sqrt(s) * z * vj
    lse = _lse_log1p(e)
    post = np.exp(e - lse[..., None])
    f = post @ values
    outer = probs[None, :, None] * weights[None, None, :]
    e_lse = np.sum(outer * lse, axis=(1, 2))
    mmse = np.sum(outer * (values[None, :, None] - f) ** 2, axis=(1, 2))
    power = np.sum(outer * f * f, axis=(1, 2))
    return e_lse, mmse, power


@_njit
def _channel_terms_one(values, log_probs, snr, nodes, weights):
    k_atoms = values.shape[0]
    n_nodes = nodes.shape[0]
    root = math.sqrt(snr)
    e = np.empty(k_atoms)
    e_lse = 0.0
    mmse = 0.0
    power = 0.0
    for k in range(k_atoms):
        pk = math.exp(log_probs[k])
        vk = values[k]
        acc_l = 0.0
        acc_m = 0.0
        acc_p = 0.0
        for n in range(n_nodes):
            z = nodes[n]
            emax = -np.inf
            jmax = 0
            for j in range(k_atoms):
                vj = values[j]
                e[j] = log_probs[j] - 0.5 * snr * vj * vj + snr * vk * vj + root * z * vj
                if e[j] > emax:
                    emax = e[j]
                    jmax = j
            rest = 0.0
            num = values[jmax]
            for j in range(k_atoms):
                if j != jmax:
                    wj = math.exp(e[j] - emax)
                    rest += wj
                    num += wj * values[j]
            f = num / (1.0 + rest)
            w = weights[n]
            acc_l += w * (emax + math.log1p(rest))
            acc_m += w * (vk - f) * (vk - f)
            acc_p += w * f * f
        e_lse += pk * acc_l
        mmse += pk * acc_m
        power += pk * acc_p
    return e_lse, mmse, power


@_njit
def _channel_terms_batch(values, log_probs, snrs, nodes, weights):
    m = snrs.shape[0]
    e_lse = np.empty(m)
    mmse = np.empty(m)
    power = np.empty(m)
    for i in range(m):
        e_lse[i], mmse[i], power[i] = _channel_terms_one(values, log_probs, snrs[i], nodes, weights)
    return e_lse, mmse, power


def channel_terms_numba(values, log_probs, snrs, nodes, weights):
    snrs = np.ascontiguousarray(np.atleast_1d(np.asarray(snrs, dtype=np.float64)))
    return _channel_terms_batch(values, log_probs, snrs, nodes, weights)


# ---------------------------------------------------------------------------
# posterior mean / variance of X given mu*X + sqrt(tau)*Z = x, elementwise
# ---------------------------------------------------------------------------

def posterior_moments_numpy(values, log_probs, mu, tau, x):
    x = np.asarray(x, dtype=np.float64)
    e = log_probs + (mu / tau) * x[..., None] * values - (mu * mu / (2.0 * tau)) * values * values
    e -= e.max(axis=-1, keepdims=True)
    w = np.exp(e)
    w /= w.sum(axis=-1, keepdims=True)
    mean = w @ values
    var = np.sum(w * (values - mean[..., None]) ** 2, axis=-1)
    return mean, var


@_njit
def _posterior_moments_flat(values, log_probs, mu, tau, x):
    k_atoms = values.shape[0]
    a = mu / tau
    b = mu * mu / (2.0 * tau)
    mean = np.empty(x.shape[0])
    var = np.empty(x.shape[0])
    e = np.empty(k_atoms)
    for i in range(x.shape[0]):
        emax = -np.inf
        for j in range(k_atoms):
            vj = values[j]
            e[j] = log_probs[j] + a * x[i] * vj - b * vj * vj
            if e[j] > emax:
                emax = e[j]
        tot = 0.0
        m1 = 0.0
        m2 = 0.0
        for j in range(k_atoms):
            wj = math.exp(e[j] - emax)
            tot += wj
            m1 += wj * values[j]
        m1 /= tot
        for j in range(k_atoms):
            d = values[j] - m1
            m2 += math.exp(e[j] - emax) * d * d
        mean[i] = m1
        var[i] = m2 / tot
    return mean, var


def posterior_moments_numba(values, log_probs, mu, tau, x):
    x = np.asarray(x, dtype=np.float64)
    mean, var = _posterior_moments_flat(values, log_probs, float(mu), float(tau),
                                        np.ascontiguousarray(x.ravel()))
    return mean.reshape(x.shape), var.reshape(x.shape)


# ---------------------------------------------------------------------------
# state-evolution fixed point iteration tau <- E[f^2] at snr = lam * tau
# ---------------------------------------------------------------------------

@_njit
def _se_iterate_numba(values, log_probs, lam, snr0, tau0, nodes, weights, tol, max_iter, stop_above):
    tau = tau0
    snr = snr0
    for it in range(1, max_iter + 1):
        _, _, tau_next = _channel_terms_one(values, log_probs, snr, nodes, weights)
        if tau_next > stop_above:
            return tau_next, it, False, True
        if abs(tau_next - tau) <= tol * abs(tau_next):
            return tau_next, it, True, False
        tau = tau_next
        snr = lam * tau
    return tau, max_iter, False, False


def se_iterate_numba(values, log_probs, lam, snr0, tau0, nodes, weights, tol, max_iter, stop_above=np.inf):
    """Iterate from (snr0, tau0); return (tau, iterations, converged, stopped_above)."""
    tau, it, conv, above = _se_iterate_numba(values, log_probs, float(lam), float(snr0), float(tau0),
                                             nodes, weights, float(tol), int(max_iter), float(stop_above))
    return float(tau), int(it), bool(conv), bool(above)


def se_iterate_numpy(values, log_probs, lam, snr0, tau0, nodes, weights, tol, max_iter, stop_above=np.inf):
    tau = float(tau0)
    snr = float(snr0)
    for it in range(1, int(max_iter) + 1):
        tau_next = float(channel_terms_numpy(values, log_probs, snr, nodes, weights)[2][0])
        if tau_next > stop_above:
            return tau_next, it, False, True
        if abs(tau_next - tau) <= tol * abs(tau_next):
            return tau_next, it, True, False
        tau = tau_next
        snr = lam * tau
    return tau, int(max_iter), False, False


# ---------------------------------------------------------------------------
# exhaustive enumeration: unnormalised log posterior weight of each config
# ---------------------------------------------------------------------------

def config_log_weights_numpy(configs, log_prior, W, lam):
    """log P(x) - H(x) for each row x of ``configs``.

    H(x) = sum_{i<j} [lam x_i^2 x_j^2 / (2n) - sqrt(lam/n) x_i x_j W_ij]; W is
    symmetric with zero diagonal.
    """
    n = configs.shape[1]
    cross = 0.5 * np.einsum("ki,ij,kj->k", configs, W, configs)
    sq = configs * configs
    pair_sq = 0.5 * (sq.sum(axis=1) ** 2 - (sq * sq).sum(axis=1))
    return log_prior + math.sqrt(lam / n) * cross - lam / (2.0 * n) * pair_sq


@_njit
def config_log_weights_numba(configs, log_prior, W, lam):
    n_cfg, n = configs.shape
    c1 = math.sqrt(lam / n)
    c2 = lam / (2.0 * n)
    out = np.empty(n_cfg)
    for k in range(n_cfg):
        acc = 0.0
        for i in range(n):
            xi = configs[k, i]
            if xi == 0.0:
                continue
            for j in range(i + 1, n):
                xj = configs[k, j]
                if xj == 0.0:
                    continue
                acc += c1 * W[i, j] * xi * xj - c2 * xi * xi * xj * xj
        out[k] = log_prior[k] + acc
    return out


if USE_NUMBA:
    channel_terms = channel_terms_numba
    posterior_moments = posterior_moments_numba
    se_iterate = se_iterate_numba
    config_log_weights = config_log_weights_numba
else:
    channel_terms = channel_terms_numpy
    posterior_moments = posterior_moments_numpy
    se_iterate = se_iterate_numpy
    config_log_weights = config_log_weights_numpy
