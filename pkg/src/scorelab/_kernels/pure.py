"""Pure-numpy implementations of the hot numerical kernels.

Mirrors the optional compiled extension ``scorelab._kernels._core``.  Both
backends run the same integer arithmetic for the counter-based generator, so
uniform draws agree bit for bit across backends; normal draws and moment
accumulations may differ by libm-vs-SIMD rounding in the last couple of ulps.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND_NAME = "pure"

_MASK64 = (1 << 64) - 1
_MX1 = 0xBF58476D1CE4E5B9
_MX2 = 0x94D049BB133111EB
_C_STREAM = 0x9E3779B97F4A7C15
_C_INDEX = 0xC2B2AE3D27D4EB4F
_C_SLOT = 0x165667B19E3779F9
_TWO_NEG53 = 2.0 ** -53


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a python int (reference implementation)."""
    z &= _MASK64
    z ^= z >> 30
    z = (z * _MX1) & _MASK64
    z ^= z >> 27
    z = (z * _MX2) & _MASK64
    return z ^ (z >> 31)


def _mix64_arr(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_MX1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_MX2)
    return z ^ (z >> np.uint64(31))


def _hash_indices(seed: int, stream: int, idx: np.ndarray, slot: int) -> np.ndarray:
    # scalar prefix in exact python ints, vector tail in uint64 arrays
    h0 = mix64((seed & _MASK64) ^ ((stream + _C_STREAM) & _MASK64))
    h = _mix64_arr(np.uint64(h0) ^ (idx + np.uint64(_C_INDEX & _MASK64)))
    return _mix64_arr(h ^ np.uint64((slot + _C_SLOT) & _MASK64))


def counter_hash(seed: int, stream: int, index, slot: int) -> np.ndarray:
    """64-bit hash of the counter (seed, stream, index, slot); vectorized in index."""
    idx = np.atleast_1d(np.asarray(index, dtype=np.uint64))
    return _hash_indices(int(seed), int(stream), idx, int(slot))


def uniform_draws(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    """count uniforms in [0, 1), element i keyed by counter index start + i."""
    idx = np.arange(start, start + count, dtype=np.uint64)
    h = _hash_indices(int(seed), int(stream), idx, 0)
    return (h >> np.uint64(11)).astype(np.float64) * _TWO_NEG53


def normal_draws(seed: int, stream: int, start: int, count: int, dim: int) -> np.ndarray:
    """(count, dim) standard normals; element (i, j) depends only on its counter.

    Box-Muller on hashed uniforms: pair p consumes slots 2p and 2p+1, so draws
    are independent of batching and can be regenerated per trajectory.
    """
    idx = np.arange(start, start + count, dtype=np.uint64)
    out = np.empty((count, dim))
    for p in range((dim + 1) // 2):
        h1 = _hash_indices(int(seed), int(stream), idx, 2 * p)
        h2 = _hash_indices(int(seed), int(stream), idx, 2 * p + 1)
        # u1 in (0, 1] keeps log finite
        u1 = ((h1 >> np.uint64(11)) + np.uint64(1)).astype(np.float64) * _TWO_NEG53
        u2 = (h2 >> np.uint64(11)).astype(np.float64) * _TWO_NEG53
        r = np.sqrt(-2.0 * np.log(u1))
        th = (2.0 * math.pi) * u2
        out[:, 2 * p] = r * np.cos(th)
        if 2 * p + 1 < dim:
            out[:, 2 * p + 1] = r * np.sin(th)
    return out


def weighted_gaussian_moments(points: np.ndarray, logw: np.ndarray,
                              x: np.ndarray, t: float):
    """Moments of the measure with density ~ exp(logw_j - |x - y_j|^2 / (2t)).

    Returns (log_mass, mean, cov).  log_mass is the max-shifted log of the
    total weight; cov is the centered second moment (two-pass, so it is
    positive semidefinite up to roundoff even when the measure concentrates).
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    lw = np.asarray(logw, dtype=np.float64)
    xv = np.atleast_1d(np.asarray(x, dtype=np.float64))
    diff = pts - xv[None, :]
    lam = lw - (diff * diff).sum(axis=1) / (2.0 * t)
    m = lam.max()
    if not np.isfinite(m):
        return -np.inf, np.full(xv.shape, np.nan), np.full((xv.size, xv.size), np.nan)
    rho = np.exp(lam - m)
    s0 = rho.sum()
    mean = rho @ pts / s0
    c = pts - mean[None, :]
    cov = (rho[:, None] * c).T @ c / s0
    cov = 0.5 * (cov + cov.T)
    return m + math.log(s0), mean, cov
