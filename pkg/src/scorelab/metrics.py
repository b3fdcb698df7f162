"""Distances, score-error measurement, moments, and rate fitting.

W1 on sorted samples is the acceptance metric (exact for empirical
measures); KDE-based KL is reported as a diagnostic only, because the
bandwidth bias would poison tight tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from . import _kernels
from .errors import QuadratureError, SpecError
from .sampler import ScoreSource, forward_sample, make_score_source
from .scorefield import gauss_hermite_rule
from .targets import (KIND_COMPACT, KIND_MIXTURE, KIND_SMOOTH,
                      FORM_POINTS, FORM_SEGMENTS, TargetSpec, as_smooth)

_STREAM_SLICE_DIRS = 1 << 22
_KDE_CHUNK = 1 << 14
_MASS_TAIL = 1e-9


@dataclass(frozen=True)
class RateFit:
    """Fit of error(N) = floor + coeff * N**(-gamma).

    ``residual`` is the root-mean-square misfit in the error domain;
    ``flagged`` marks degenerate inputs where the fit is not trustworthy.
    """

    floor: float
    coeff: float
    gamma: float
    residual: float
    flagged: bool = False


# ---------------------------------------------------------------------------
# Wasserstein-1


def _flat_sorted(a) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64).ravel()
    if arr.size == 0:
        raise SpecError("w1_1d needs nonempty sample sets")
    return np.sort(arr)


def _quantiles(sorted_arr: np.ndarray, k: int) -> np.ndarray:
    # midpoint quantiles (i + 1/2)/k with linear interpolation between
    # order statistics; exact when sizes already match
    q = (np.arange(k) + 0.5) / k
    pos = q * sorted_arr.size - 0.5
    lo = np.clip(np.floor(pos).astype(int), 0, sorted_arr.size - 1)
    hi = np.clip(lo + 1, 0, sorted_arr.size - 1)
    frac = np.clip(pos - lo, 0.0, 1.0)
    return sorted_arr[lo] * (1 - frac) + sorted_arr[hi] * frac


def w1_1d(a, b) -> float:
    """1-Wasserstein distance between two 1d empirical measures."""
    sa, sb = _flat_sorted(a), _flat_sorted(b)
    if sa.size == sb.size:
        return float(np.abs(sa - sb).mean())
    k = min(sa.size, sb.size)
    return float(np.abs(_quantiles(sa, k) - _quantiles(sb, k)).mean())


def w1_sliced(a, b, directions: int = 64, seed: int = 0) -> float:
    """Sliced W1 in 2d: mean of w1_1d over random unit directions."""
    pa = np.atleast_2d(np.asarray(a, dtype=np.float64))
    pb = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if pa.shape[1] != 2 or pb.shape[1] != 2:
        raise SpecError("w1_sliced expects (m, 2) sample sets")
    angles = 2 * math.pi * _kernels.uniform_draws(
        seed, _STREAM_SLICE_DIRS, 0, directions)
    total = 0.0
    for th in angles:
        u = np.array([math.cos(th), math.sin(th)])
        total += w1_1d(pa @ u, pb @ u)
    return total / directions


# ---------------------------------------------------------------------------
# KDE-based KL diagnostic


def silverman_bandwidth(samples: np.ndarray) -> float:
    m = samples.size
    std = samples.std(ddof=1)
    q75, q25 = np.percentile(samples, [75, 25])
    spread = min(std, (q75 - q25) / 1.34) or std
    if spread <= 0:
        raise SpecError("samples are degenerate; no bandwidth")
    return 0.9 * spread * m ** (-0.2)


def _kde_log_density(grid: np.ndarray, samples: np.ndarray,
                     h: float) -> np.ndarray:
    out = np.full(grid.size, -np.inf)
    norm = math.log(samples.size * h * math.sqrt(2 * math.pi))
    for s in range(0, samples.size, _KDE_CHUNK):
        block = samples[s:s + _KDE_CHUNK]
        z = (grid[:, None] - block[None, :]) / h
        mx = (-0.5 * z * z)
        top = mx.max(axis=1)
        part = top + np.log(np.exp(mx - top[:, None]).sum(axis=1))
        out = np.logaddexp(out, part)
    return out - norm


def _density_window(density: Callable, lo: float, hi: float):
    """Expand [lo, hi] until it holds all but 1e-9 of the density's mass."""
    for _ in range(120):
        xs = np.linspace(lo, hi, 4097)
        vals = np.asarray(density(xs), dtype=np.float64)
        if not np.all(np.isfinite(vals)):
            raise SpecError("density evaluator returned non-finite values")
        mass = np.trapezoid(vals, xs)
        edge = (vals[0] + vals[-1]) * (hi - lo)
        if mass >= 1.0 - _MASS_TAIL and edge <= _MASS_TAIL:
            return xs, vals
        pad = 0.5 * (hi - lo)
        lo, hi = lo - pad, hi + pad
    raise QuadratureError("density mass window did not converge",
                          lo=lo, hi=hi, mass=float(mass))


def kl_kde_1d(samples, density: Callable) -> Tuple[float, float]:
    """KL(p0 || KDE of samples) by quadrature; returns (value, bandwidth).

    Diagnostic only: carries KDE bandwidth bias of order h^2.
    """
    arr = np.asarray(samples, dtype=np.float64).ravel()
    if arr.size < 1000:
        raise SpecError("kl_kde_1d needs at least 1000 samples")
    h = silverman_bandwidth(arr)
    center = float(np.median(arr))
    xs, p0 = _density_window(density, center - 1.0, center + 1.0)
    log_q = _kde_log_density(xs, arr, h)
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = np.where(p0 > 0, p0 * (np.log(np.maximum(p0, 1e-300))
                                           - log_q), 0.0)
    return float(np.trapezoid(integrand, xs)), float(h)


# ---------------------------------------------------------------------------
# score-error measurement


def eps0(source: ScoreSource, target: TargetSpec, schedule: Sequence[float],
         mc: int, seed: int = 0,
         reference: Optional[ScoreSource] = None) -> Tuple[float, float]:
    """Time-weighted root-mean-square score error of ``source``.

    Estimates sqrt((1/T) sum_k (t_k - t_{k-1}) E|s_true - s|^2(t_k)) with
    t_0 = 0 and T the last grid time, by Monte Carlo from the noised law at
    each t_k.  Returns (estimate, standard error).
    """
    grid = np.asarray(schedule, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0 or grid[0] <= 0 \
            or np.any(np.diff(grid) <= 0):
        raise SpecError("schedule must be strictly increasing and positive")
    if mc < 2:
        raise SpecError("mc must be >= 2")
    ref = reference
    if ref is None:
        kind = "exact" if (target.mixture is not None
                           or target.mixture_equivalent is not None) \
            else "quadrature"
        ref = make_score_source(kind, target)
    T = float(grid[-1])
    weights = np.diff(np.concatenate([[0.0], grid]))
    total = 0.0
    var_sum = 0.0
    for k, (t, w) in enumerate(zip(grid, weights)):
        pts = forward_sample(target, float(t), mc, seed + k)
        err = np.asarray(source(float(t), pts), dtype=np.float64) \
            - np.asarray(ref(float(t), pts), dtype=np.float64)
        sq = (err * err).sum(axis=1)
        total += w * sq.mean()
        var_sum += (w / T) ** 2 * sq.var(ddof=1) / mc
    value = total / T
    est = math.sqrt(max(value, 0.0))
    if est > 0:
        stderr = math.sqrt(var_sum) / (2 * est)
    else:
        stderr = math.sqrt(math.sqrt(var_sum)) if var_sum > 0 else 0.0
    return est, stderr


# ---------------------------------------------------------------------------
# rate fitting


def _log_linear(ns, errs, floor):
    y = errs - floor
    if np.any(y <= 0):
        return None
    ly, ln = np.log(y), np.log(ns)
    A = np.column_stack([np.ones_like(ln), -ln])
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    fit = floor + np.exp(A @ coef)
    sse = float(((fit - errs) ** 2).sum())
    return math.exp(coef[0]), coef[1], sse


def rate_fit(points: Sequence[Tuple[float, float]]) -> RateFit:
    """Fit error(N) = a + b N^-gamma over (N, error) pairs.

    The floor a is profiled out over [0, min error) in one coordinate-descent
    pass: a bounded scalar minimization of the residual, with (b, gamma)
    refit by log-domain least squares at each trial floor.
    """
    pts = sorted((float(n), float(e)) for n, e in points)
    if len(pts) < 4:
        raise SpecError("rate_fit needs at least 4 points")
    ns = np.array([p[0] for p in pts])
    errs = np.array([p[1] for p in pts])
    if np.unique(ns).size != ns.size:
        raise SpecError("rate_fit needs distinct N values")
    if np.allclose(errs, errs[0], rtol=0, atol=0):
        return RateFit(floor=float(errs[0]), coeff=0.0, gamma=0.0,
                       residual=0.0, flagged=True)
    e_min = errs.min()
    if e_min <= 0:
        return RateFit(floor=float(min(e_min, 0.0)), coeff=0.0, gamma=0.0,
                       residual=float(errs.std()), flagged=True)
    upper = e_min * (1 - 1e-12)

    def sse_at(a):
        out = _log_linear(ns, errs, a)
        return math.inf if out is None else out[2]

    res = minimize_scalar(sse_at, bounds=(0.0, upper), method="bounded",
                          options={"xatol": 1e-13 * max(1.0, abs(e_min))})
    best = _log_linear(ns, errs, float(res.x))
    if best is None:
        return RateFit(floor=float(e_min), coeff=0.0, gamma=0.0,
                       residual=float(errs.std()), flagged=True)
    b, gamma, sse = best
    return RateFit(floor=float(res.x), coeff=float(b), gamma=float(gamma),
                   residual=math.sqrt(sse / len(pts)),
                   flagged=not math.isfinite(gamma))


# ---------------------------------------------------------------------------
# moments


def _gh_points_1d(order=80):
    z, w = gauss_hermite_rule(order)
    return z, w


def _mixture_moment(mix, m: int) -> float:
    # polynomial in the component normals, so tensor Gauss-Hermite is exact
    z, w = _gh_points_1d()
    total = 0.0
    for wk, mu, var in zip(mix.weights, mix.means, mix.variances):
        sd = math.sqrt(var)
        if mix.dim == 1:
            x = mu[0] + sd * math.sqrt(2) * z
            total += wk * (w @ np.abs(x) ** m) / math.sqrt(math.pi)
        else:
            x = mu[0] + sd * math.sqrt(2) * z
            y = mu[1] + sd * math.sqrt(2) * z
            r2 = x[:, None] ** 2 + y[None, :] ** 2
            total += wk * (w @ (r2 ** (m // 2)) @ w) / math.pi
    return total


def _compact_moment(compact, m: int) -> float:
    if compact.form == FORM_POINTS:
        r = np.sqrt((compact.points ** 2).sum(axis=1))
        return float(compact.weights @ r ** m)
    z, w = np.polynomial.legendre.leggauss(64)
    if compact.form == FORM_SEGMENTS:
        total = weight = 0.0
        for lo, hi in compact.intervals:
            half = 0.5 * (hi - lo)
            x = 0.5 * (hi + lo) + half * z
            total += half * (w @ np.abs(x) ** m)
            weight += hi - lo
        return total / weight
    total = area = 0.0
    for x0, x1, y0, y1 in compact.rects:
        hx, hy = 0.5 * (x1 - x0), 0.5 * (y1 - y0)
        xs = 0.5 * (x1 + x0) + hx * z
        ys = 0.5 * (y1 + y0) + hy * z
        r2 = xs[:, None] ** 2 + ys[None, :] ** 2
        total += hx * hy * (w @ r2 ** (m // 2) @ w)
        area += (x1 - x0) * (y1 - y0)
    return total / area


def _smooth_moment(target, m: int) -> float:
    spec = as_smooth(target)
    z, w = gauss_hermite_rule(400)
    if spec.dim == 1:
        x = math.sqrt(2) * z
        gv = np.asarray(spec.g(x[:, None])[0], dtype=np.float64)
        gv = gv - gv.min()
        mass = w @ np.exp(-gv)
        return float((w @ (np.abs(x) ** m * np.exp(-gv))) / mass)
    xs = math.sqrt(2) * z
    gridx, gridy = np.meshgrid(xs, xs, indexing="ij")
    pts = np.column_stack([gridx.ravel(), gridy.ravel()])
    gv = np.asarray(spec.g(pts)[0], dtype=np.float64).reshape(z.size, z.size)
    gv = gv - gv.min()
    dens = np.exp(-gv)
    mass = w @ dens @ w
    r2 = gridx ** 2 + gridy ** 2
    return float((w @ (r2 ** (m // 2) * dens) @ w) / mass)


def moments(data, m: int) -> float:
    """E|X|^m for a sample array or a catalog target, m in {2, 4, 8}."""
    if m not in (2, 4, 8):
        raise SpecError("moment order must be one of 2, 4, 8")
    if isinstance(data, TargetSpec):
        if data.kind == KIND_MIXTURE:
            return _mixture_moment(data.mixture, m)
        if data.kind == KIND_COMPACT:
            return _compact_moment(data.compact, m)
        return _smooth_moment(data, m)
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    r = np.sqrt((arr * arr).sum(axis=1))
    return float((r ** m).mean())
