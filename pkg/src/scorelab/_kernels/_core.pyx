# cython: language_level=3
"""Compiled kernels: counter-based RNG and kernel-weighted moments.

Contract mirrors scorelab._kernels.pure; integer arithmetic is identical so
uniform draws match the pure backend bit for bit.
"""

import numpy as np

from libc.math cimport INFINITY, cos, exp, log, sin, sqrt

BACKEND_NAME = "compiled"

cdef extern from *:
    """
    #include <stdint.h>
    static const uint64_t SL_MX1 = 0xBF58476D1CE4E5B9ULL;
    static const uint64_t SL_MX2 = 0x94D049BB133111EBULL;
    static const uint64_t SL_C_STREAM = 0x9E3779B97F4A7C15ULL;
    static const uint64_t SL_C_INDEX = 0xC2B2AE3D27D4EB4FULL;
    static const uint64_t SL_C_SLOT = 0x165667B19E3779F9ULL;
    static inline uint64_t sl_mix64(uint64_t z) {
        z ^= z >> 30; z *= SL_MX1;
        z ^= z >> 27; z *= SL_MX2;
        return z ^ (z >> 31);
    }
    static inline uint64_t sl_hash(uint64_t seed, uint64_t stream,
                                   uint64_t idx, uint64_t slot) {
        uint64_t h = sl_mix64(seed ^ (stream + SL_C_STREAM));
        h = sl_mix64(h ^ (idx + SL_C_INDEX));
        return sl_mix64(h ^ (slot + SL_C_SLOT));
    }
    """
    ctypedef unsigned long long uint64_t
    uint64_t sl_mix64(uint64_t z) nogil
    uint64_t sl_hash(uint64_t seed, uint64_t stream, uint64_t idx, uint64_t slot) nogil

cdef double TWO_NEG53 = 2.0 ** -53
cdef double TWOPI = 6.283185307179586


def uniform_draws(seed, stream, start, count):
    cdef uint64_t s = <uint64_t> (int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t st = <uint64_t> (int(stream) & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t i0 = <uint64_t> (int(start) & 0xFFFFFFFFFFFFFFFF)
    cdef Py_ssize_t n = count
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            out[i] = <double> (sl_hash(s, st, i0 + <uint64_t> i, 0) >> 11) * TWO_NEG53
    return out_arr


def normal_draws(seed, stream, start, count, dim):
    cdef uint64_t s = <uint64_t> (int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t st = <uint64_t> (int(stream) & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t i0 = <uint64_t> (int(start) & 0xFFFFFFFFFFFFFFFF)
    cdef Py_ssize_t n = count
    cdef Py_ssize_t d = dim
    out_arr = np.empty((n, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, p
    cdef uint64_t idx
    cdef double u1, u2, r, th
    with nogil:
        for i in range(n):
            idx = i0 + <uint64_t> i
            for p in range((d + 1) // 2):
                u1 = <double> ((sl_hash(s, st, idx, 2 * p) >> 11) + 1) * TWO_NEG53
                u2 = <double> (sl_hash(s, st, idx, 2 * p + 1) >> 11) * TWO_NEG53
                r = sqrt(-2.0 * log(u1))
                th = TWOPI * u2
                out[i, 2 * p] = r * cos(th)
                if 2 * p + 1 < d:
                    out[i, 2 * p + 1] = r * sin(th)
    return out_arr


def weighted_gaussian_moments(points, logw, x, t):
    pts_arr = np.ascontiguousarray(points, dtype=np.float64)
    if pts_arr.ndim == 1:
        pts_arr = pts_arr[:, None]
    lw_arr = np.ascontiguousarray(logw, dtype=np.float64)
    x_arr = np.atleast_1d(np.ascontiguousarray(x, dtype=np.float64))
    # const views accept the read-only arrays frozen by the spec layer
    cdef const double[:, ::1] pts = pts_arr
    cdef const double[::1] lw = lw_arr
    cdef const double[::1] xv = x_arr
    cdef Py_ssize_t m = pts.shape[0]
    cdef Py_ssize_t d = pts.shape[1]
    cdef double tt = t
    lam_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] lam = lam_arr
    mean_arr = np.zeros(d, dtype=np.float64)
    cov_arr = np.zeros((d, d), dtype=np.float64)
    cdef double[::1] mean = mean_arr
    cdef double[:, ::1] cov = cov_arr
    cdef Py_ssize_t i, a, b
    cdef double acc, mx, s0, r, ca, cb
    cdef double log_mass = 0.0
    with nogil:
        mx = -INFINITY
        for i in range(m):
            acc = 0.0
            for a in range(d):
                ca = pts[i, a] - xv[a]
                acc += ca * ca
            lam[i] = lw[i] - acc / (2.0 * tt)
            if lam[i] > mx:
                mx = lam[i]
    if not np.isfinite(mx):
        return (-np.inf, np.full(d, np.nan), np.full((d, d), np.nan))
    with nogil:
        s0 = 0.0
        for i in range(m):
            lam[i] = exp(lam[i] - mx)
            s0 += lam[i]
        for i in range(m):
            r = lam[i]
            for a in range(d):
                mean[a] += r * pts[i, a]
        for a in range(d):
            mean[a] /= s0
        for i in range(m):
            r = lam[i]
            for a in range(d):
                ca = pts[i, a] - mean[a]
                for b in range(a, d):
                    cb = pts[i, b] - mean[b]
                    cov[a, b] += r * ca * cb
        for a in range(d):
            for b in range(a, d):
                cov[a, b] /= s0
                cov[b, a] = cov[a, b]
        log_mass = mx + log(s0)
    return (log_mass, mean_arr, cov_arr)
