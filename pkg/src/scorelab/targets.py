"""Target distributions and their regularity metadata.

A target is the time-zero law of the forward noising process.  Three kinds are
supported: explicit Gaussian mixtures (closed-form reference fields), smooth
potentials given through an evaluator for ``g = -log p0 - |x|^2 / 2``, and
compactly supported measures (atoms or uniform measures on simple regions).

Potential evaluators are batch callables: given points of shape ``(m, n)``
they return ``(g, grad, hess)`` with shapes ``(m,)``, ``(m, n)``, ``(m, n, n)``
and must be pure (no state, no RNG).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import EvaluationDomainError, SpecError, UnsupportedOperationError

KIND_MIXTURE = "gaussian_mixture"
KIND_SMOOTH = "smooth_potential"
KIND_COMPACT = "compact_measure"

FORM_POINTS = "weighted_points"
FORM_SEGMENTS = "uniform_segment_1d"
FORM_RECTS = "uniform_polygonal_2d"

_LOG_2PI = math.log(2.0 * math.pi)


def _frozen_array(obj, name, value, dtype=np.float64):
    arr = np.array(value, dtype=dtype)
    arr.setflags(write=False)
    object.__setattr__(obj, name, arr)
    return arr


@dataclass(frozen=True, eq=False)
class GaussianMixtureSpec:
    """Finite isotropic Gaussian mixture: weights, means (k, n), variances (k,)."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = _frozen_array(self, "weights", self.weights)
        mu = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        mu = _frozen_array(self, "means", mu)
        v = _frozen_array(self, "variances", self.variances)
        if w.ndim != 1 or v.ndim != 1 or mu.ndim != 2:
            raise SpecError("mixture arrays must be (k,), (k, n), (k,)")
        k = w.size
        if mu.shape[0] != k or v.size != k or k == 0:
            raise SpecError("mixture component counts disagree")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise SpecError("mixture weights must be nonnegative and sum to 1")
        if np.any(v <= 0):
            raise SpecError("mixture variances must be positive")

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def k(self) -> int:
        return self.weights.size


@dataclass(frozen=True, eq=False)
class SmoothPotentialSpec:
    """Smooth potential with declared curvature / growth constants.

    ``m0`` and ``m1`` bound the Hessian of g from below and above, ``lip`` its
    spectral norm, ``(alpha1, alpha2)`` the quadratic lower-growth condition
    about the origin, ``(beta1, beta2)`` the linear gradient-growth condition
    about ``x0``.  Declared values are promises; ``validate_metadata`` checks
    them against the evaluator on a grid.
    """

    g: Callable[[np.ndarray], tuple]
    dim: int
    m0: float
    m1: float
    lip: float
    alpha1: float
    alpha2: float
    beta1: float
    beta2: float
    x0: np.ndarray

    def __post_init__(self):
        _frozen_array(self, "x0", np.atleast_1d(np.asarray(self.x0, dtype=np.float64)))
        if self.x0.shape != (self.dim,):
            raise SpecError("x0 must have shape (dim,)")
        if self.dim < 1:
            raise SpecError("dim must be >= 1")
        if not (0.0 <= self.alpha2 < 1.0):
            raise SpecError("alpha2 must lie in [0, 1)")
        if min(self.m0, self.m1, self.lip, self.alpha1, self.beta1, self.beta2) < 0:
            raise SpecError("curvature and growth constants must be nonnegative")
        if self.beta1 == 0.0 and self.beta2 > 0.0:
            # the gradient-bound constant is undefined in this corner
            raise SpecError("beta1 == 0 with beta2 > 0 is rejected")


@dataclass(frozen=True, eq=False)
class CompactMeasureSpec:
    """Compactly supported initial measure inside the ball of radius ``radius``.

    Forms: ``weighted_points`` (atoms + weights), ``uniform_segment_1d``
    (uniform on a union of disjoint intervals), ``uniform_polygonal_2d``
    (uniform on a union of disjoint axis-aligned rectangles, each given as
    (x_lo, x_hi, y_lo, y_hi)).
    """

    form: str
    dim: int
    radius: float
    points: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    intervals: Optional[np.ndarray] = None
    rects: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.radius <= 0:
            raise SpecError("support radius must be positive")
        if self.form == FORM_POINTS:
            if self.points is None or self.weights is None:
                raise SpecError("weighted_points needs points and weights")
            pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
            pts = _frozen_array(self, "points", pts)
            w = _frozen_array(self, "weights", self.weights)
            if pts.shape != (w.size, self.dim):
                raise SpecError("points must be (k, dim) matching weights")
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
                raise SpecError("weights must be nonnegative and sum to 1")
            if np.any(np.linalg.norm(pts, axis=1) > self.radius + 1e-12):
                raise SpecError("atoms must lie inside the declared support ball")
        elif self.form == FORM_SEGMENTS:
            if self.dim != 1 or self.intervals is None:
                raise SpecError("uniform_segment_1d needs dim 1 and intervals")
            iv = np.atleast_2d(np.asarray(self.intervals, dtype=np.float64))
            iv = _frozen_array(self, "intervals", iv)
            if iv.shape[1] != 2 or np.any(iv[:, 1] <= iv[:, 0]):
                raise SpecError("intervals must be (k, 2) with positive length")
            if np.any(np.abs(iv) > self.radius + 1e-12):
                raise SpecError("intervals must lie inside the support ball")
        elif self.form == FORM_RECTS:
            if self.dim != 2 or self.rects is None:
                raise SpecError("uniform_polygonal_2d needs dim 2 and rects")
            rc = np.atleast_2d(np.asarray(self.rects, dtype=np.float64))
            rc = _frozen_array(self, "rects", rc)
            if rc.shape[1] != 4 or np.any(rc[:, 1] <= rc[:, 0]) or np.any(rc[:, 3] <= rc[:, 2]):
                raise SpecError("rects must be (k, 4) = (x_lo, x_hi, y_lo, y_hi)")
            # farthest point of an axis-aligned rect is one of its corners
            xs = np.abs(rc[:, :2]).max(axis=1)
            ys = np.abs(rc[:, 2:]).max(axis=1)
            if np.any(np.hypot(xs, ys) > self.radius + 1e-12):
                raise SpecError("rects must lie inside the support ball")
        else:
            raise SpecError(f"unknown compact form {self.form!r}")

    def total_measure(self) -> float:
        if self.form == FORM_SEGMENTS:
            return float((self.intervals[:, 1] - self.intervals[:, 0]).sum())
        if self.form == FORM_RECTS:
            return float(((self.rects[:, 1] - self.rects[:, 0])
                          * (self.rects[:, 3] - self.rects[:, 2])).sum())
        return 1.0


@dataclass(frozen=True, eq=False)
class TargetSpec:
    """A named target: exactly one payload, by kind.

    ``mixture_equivalent`` optionally records an exact Gaussian-mixture
    representation of a smooth target (used for exact scores and sampling).
    """

    kind: str
    dim: int
    name: str = ""
    mixture: Optional[GaussianMixtureSpec] = None
    smooth: Optional[SmoothPotentialSpec] = None
    compact: Optional[CompactMeasureSpec] = None
    mixture_equivalent: Optional[GaussianMixtureSpec] = None

    def __post_init__(self):
        payloads = [p is not None for p in (self.mixture, self.smooth, self.compact)]
        if sum(payloads) != 1:
            raise SpecError("exactly one payload must be present")
        if self.kind not in (KIND_MIXTURE, KIND_SMOOTH, KIND_COMPACT):
            raise SpecError(f"unknown target kind {self.kind!r}")
        payload = self.mixture or self.smooth or self.compact
        if payload.dim != self.dim:
            raise SpecError("payload dimension disagrees with TargetSpec.dim")
        expected = {KIND_MIXTURE: self.mixture, KIND_SMOOTH: self.smooth,
                    KIND_COMPACT: self.compact}[self.kind]
        if expected is None:
            raise SpecError("payload does not match declared kind")


# ---------------------------------------------------------------------------
# mixture math


def mixture_at_time(spec: GaussianMixtureSpec, t: float) -> GaussianMixtureSpec:
    """Push the mixture through the forward noising flow for time ``t`` >= 0.

    Means contract by e^{-t/2}; each variance relaxes toward 1 along
    v e^{-t} + (1 - e^{-t}).
    """
    if t < 0:
        raise SpecError("t must be nonnegative")
    decay = math.exp(-t)
    return GaussianMixtureSpec(
        weights=spec.weights,
        means=spec.means * math.sqrt(decay),
        variances=spec.variances * decay + (1.0 - decay),
    )


def _mixture_log_density_parts(mix: GaussianMixtureSpec, pts: np.ndarray):
    """Per-point responsibilities and component scores for a mixture.

    Returns (log_density (m,), resp (m, k), comp_scores (m, k, n)).
    """
    n = mix.dim
    diff = pts[:, None, :] - mix.means[None, :, :]          # (m, k, n)
    v = mix.variances[None, :]                              # (1, k)
    sq = (diff * diff).sum(axis=2)                          # (m, k)
    logc = np.log(mix.weights)[None, :] - 0.5 * n * np.log(2.0 * math.pi * mix.variances)[None, :]
    lq = logc - 0.5 * sq / v
    mx = lq.max(axis=1, keepdims=True)
    r = np.exp(lq - mx)
    tot = r.sum(axis=1, keepdims=True)
    logp = (mx + np.log(tot))[:, 0]
    resp = r / tot
    comp_scores = -diff / v[:, :, None]
    return logp, resp, comp_scores


def mixture_potential_evaluator(mix: GaussianMixtureSpec) -> Callable[[np.ndarray], tuple]:
    """Closed-form batch evaluator of g = -log p0 - |x|^2/2 for a mixture."""

    n = mix.dim
    eye = np.eye(n)

    def evaluate(pts: np.ndarray):
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        logp, resp, s = _mixture_log_density_parts(mix, pts)
        dlogp = (resp[:, :, None] * s).sum(axis=1)          # (m, n)
        outer_s = s[:, :, :, None] * s[:, :, None, :]       # (m, k, n, n)
        iv = (1.0 / mix.variances)[None, :, None, None]
        d2logp = (resp[:, :, None, None] * (outer_s - iv * eye)).sum(axis=1)
        d2logp -= dlogp[:, :, None] * dlogp[:, None, :]
        g = -logp - 0.5 * (pts * pts).sum(axis=1)
        grad = -dlogp - pts
        hess = -d2logp - eye[None, :, :]
        return g, grad, hess

    return evaluate


def _scan_window(mix: GaussianMixtureSpec):
    spread = 12.0 * max(1.0, float(np.sqrt(mix.variances).max()))
    lo = mix.means.min(axis=0) - spread
    hi = mix.means.max(axis=0) + spread
    return lo, hi


def smooth_from_mixture(mix: GaussianMixtureSpec) -> SmoothPotentialSpec:
    """Smooth-potential view of a mixture, with metadata from a dense scan.

    Curvature constants come from the closed-form Hessian of g on a wide
    window (inflated by 1e-6 relative slack for grid resolution); the
    quadratic lower-growth pair absorbs any supercritical variance.
    """
    key = (tuple(mix.weights.tolist()), tuple(map(tuple, mix.means.tolist())),
           tuple(mix.variances.tolist()))
    return _smooth_from_mixture_cached(key)


@functools.lru_cache(maxsize=64)
def _smooth_from_mixture_cached(key) -> SmoothPotentialSpec:
    weights, means, variances = key
    mix = GaussianMixtureSpec(weights=np.array(weights), means=np.array(means),
                              variances=np.array(variances))
    evaluate = mixture_potential_evaluator(mix)
    n = mix.dim
    lo, hi = _scan_window(mix)
    if n == 1:
        pts = np.linspace(lo[0], hi[0], 8001)[:, None]
    elif n == 2:
        ax = [np.linspace(lo[i], hi[i], 241) for i in range(2)]
        g1, g2 = np.meshgrid(ax[0], ax[1], indexing="ij")
        pts = np.column_stack([g1.ravel(), g2.ravel()])
    else:
        raise UnsupportedOperationError("mixture metadata scan supports dim <= 2")
    g, grad, hess = evaluate(pts)
    eigs = np.linalg.eigvalsh(hess)
    inflate = 1.0 + 1e-6
    m0 = max(0.0, float(-eigs.min())) * inflate + 1e-12
    m1 = max(0.0, float(eigs.max())) * inflate + 1e-12
    lip = max(m0, m1)
    i0 = int(np.argmin(g))
    x0 = pts[i0]
    beta1 = lip
    beta2 = float(np.linalg.norm(grad[i0])) * inflate + 1e-12
    g_origin = float(evaluate(np.zeros((1, n)))[0][0])
    vmax = float(mix.variances.max())
    if vmax < 1.0:
        alpha2 = 0.0
    else:
        # strictly dominate the asymptotic quadratic rate, leaving slack
        # for linear cross terms
        alpha2 = min(1.0 - 0.9 / vmax, 0.999)
    sq = 0.5 * (pts * pts).sum(axis=1)
    slack = g_origin - g - alpha2 * sq
    # re-check on a 3x wider coarse window so the scan max is global
    wide = pts * 3.0
    gw = evaluate(wide)[0]
    slack_w = g_origin - gw - alpha2 * 0.5 * (wide * wide).sum(axis=1)
    alpha1 = max(0.0, float(slack.max()), float(slack_w.max())) * inflate + 1e-12
    return SmoothPotentialSpec(g=evaluate, dim=n, m0=m0, m1=m1, lip=lip,
                               alpha1=alpha1, alpha2=alpha2,
                               beta1=beta1, beta2=beta2, x0=x0)


def as_smooth(target: TargetSpec) -> SmoothPotentialSpec:
    """Smooth-potential payload of a target (mixtures get the closed-form view)."""
    if target.smooth is not None:
        return target.smooth
    if target.mixture is not None:
        return smooth_from_mixture(target.mixture)
    raise UnsupportedOperationError(f"{target.kind} target has no smooth potential")


# ---------------------------------------------------------------------------
# evaluation


def eval_potential(spec, x):
    """Evaluate (g, grad g, hess g) at a single point.

    ``spec`` may be a SmoothPotentialSpec or a TargetSpec whose kind supports
    a smooth view.  Non-finite outputs raise EvaluationDomainError.
    """
    if isinstance(spec, TargetSpec):
        spec = as_smooth(spec)
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape != (spec.dim,):
        raise SpecError(f"x must have shape ({spec.dim},)")
    g, grad, hess = spec.g(x[None, :])
    g = float(g[0])
    grad = np.asarray(grad[0], dtype=np.float64)
    hess = np.asarray(hess[0], dtype=np.float64)
    if not (np.isfinite(g) and np.isfinite(grad).all() and np.isfinite(hess).all()):
        raise EvaluationDomainError(f"potential evaluator non-finite at x={x!r}")
    return g, grad, hess


# ---------------------------------------------------------------------------
# catalog


def _constant_potential_evaluator(value: float, n: int):
    def evaluate(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        m = pts.shape[0]
        return (np.full(m, value), np.zeros((m, n)), np.zeros((m, n, n)))

    return evaluate


def _quadratic_potential_evaluator(a: float, const: float, n: int):
    eye = np.eye(n)

    def evaluate(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        m = pts.shape[0]
        g = 0.5 * a * (pts * pts).sum(axis=1) + const
        grad = a * pts
        hess = np.broadcast_to(a * eye, (m, n, n)).copy()
        return g, grad, hess

    return evaluate


def _cosine_potential_evaluator(a: float, b: float):
    def evaluate(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        x = pts[:, 0]
        g = a * np.cos(b * x)
        grad = (-a * b * np.sin(b * x))[:, None]
        hess = (-a * b * b * np.cos(b * x))[:, None, None]
        return g, grad, hess

    return evaluate


def _std_normal(dim=1):
    n = int(dim)
    const = 0.5 * n * _LOG_2PI
    smooth = SmoothPotentialSpec(
        g=_constant_potential_evaluator(const, n), dim=n,
        m0=0.0, m1=0.0, lip=0.0, alpha1=0.0, alpha2=0.0,
        beta1=0.0, beta2=0.0, x0=np.zeros(n))
    equiv = GaussianMixtureSpec(weights=[1.0], means=np.zeros((1, n)), variances=[1.0])
    return TargetSpec(kind=KIND_SMOOTH, dim=n, name="std_normal",
                      smooth=smooth, mixture_equivalent=equiv)


def _gaussian(sigma2, dim=1):
    if sigma2 <= 0:
        raise SpecError("sigma2 must be positive")
    n = int(dim)
    a = 1.0 / sigma2 - 1.0
    const = 0.5 * n * math.log(2.0 * math.pi * sigma2)
    smooth = SmoothPotentialSpec(
        g=_quadratic_potential_evaluator(a, const, n), dim=n,
        m0=max(0.0, -a), m1=max(0.0, a), lip=abs(a),
        alpha1=0.0, alpha2=max(0.0, -a),
        beta1=abs(a), beta2=0.0, x0=np.zeros(n))
    equiv = GaussianMixtureSpec(weights=[1.0], means=np.zeros((1, n)),
                                variances=[float(sigma2)])
    return TargetSpec(kind=KIND_SMOOTH, dim=n, name=f"gaussian({sigma2})",
                      smooth=smooth, mixture_equivalent=equiv)


def _mixture2(w=0.5, mu1=-1.0, mu2=1.0, sigma2=0.25):
    if not (0.0 < w < 1.0):
        raise SpecError("w must lie in (0, 1)")
    mix = GaussianMixtureSpec(weights=[w, 1.0 - w],
                              means=[[float(mu1)], [float(mu2)]],
                              variances=[float(sigma2), float(sigma2)])
    return TargetSpec(kind=KIND_MIXTURE, dim=1, name="mixture2",
                      mixture=mix, mixture_equivalent=mix)


def _cosine(a=1.0, b=1.0):
    if a <= 0 or b <= 0:
        raise SpecError("a and b must be positive")
    curv = a * b * b
    smooth = SmoothPotentialSpec(
        g=_cosine_potential_evaluator(a, b), dim=1,
        m0=curv, m1=curv, lip=curv,
        alpha1=2.0 * a, alpha2=0.0,
        beta1=curv, beta2=0.0, x0=np.zeros(1))
    return TargetSpec(kind=KIND_SMOOTH, dim=1, name=f"cosine_potential({a},{b})",
                      smooth=smooth)


def _two_point():
    compact = CompactMeasureSpec(form=FORM_POINTS, dim=1, radius=1.0,
                                 points=[[-1.0], [1.0]], weights=[0.5, 0.5])
    return TargetSpec(kind=KIND_COMPACT, dim=1, name="two_point", compact=compact)


def _notched_square():
    # [-2, 2]^2 with the half-strip [0, 2] x [-1, 1] removed, as three rects
    rects = [(-2.0, 0.0, -1.0, 1.0),
             (-2.0, 2.0, 1.0, 2.0),
             (-2.0, 2.0, -2.0, -1.0)]
    compact = CompactMeasureSpec(form=FORM_RECTS, dim=2,
                                 radius=2.0 * math.sqrt(2.0), rects=rects)
    return TargetSpec(kind=KIND_COMPACT, dim=2, name="notched_square", compact=compact)


def catalog(name: str, params: Optional[dict] = None, **kw) -> TargetSpec:
    """Build a curated target by name.

    Names: std_normal, gaussian, mixture2, cosine_potential, two_point,
    notched_square, counterexample_block, counterexample_chain.  ``params``
    and keyword arguments are merged (keywords win).
    """
    merged = dict(params or {})
    merged.update(kw)
    if name == "std_normal":
        return _std_normal(**merged)
    if name == "gaussian":
        return _gaussian(**merged)
    if name == "mixture2":
        return _mixture2(**merged)
    if name == "cosine_potential":
        return _cosine(**merged)
    if name == "two_point":
        return _two_point()
    if name == "notched_square":
        return _notched_square()
    if name == "counterexample_block":
        from . import counterexample

        return counterexample.block_target(**merged)
    if name == "counterexample_chain":
        from . import counterexample

        K = merged.pop("K")
        chain, target = counterexample.assemble_chain(K, **merged)
        return target
    raise SpecError(f"unknown catalog target {name!r}")


# ---------------------------------------------------------------------------
# metadata validation


@dataclass(frozen=True)
class MetadataReport:
    """Observed-vs-declared audit of a target's metadata on a grid.

    Violations are data, not errors: a target with optimistic declared
    constants produces a report listing what failed, nothing raises.
    """

    name: str
    kind: str
    declared: dict
    observed: dict
    violations: tuple
    fd_grad_rel: float = math.nan
    fd_hess_rel: float = math.nan

    @property
    def ok(self) -> bool:
        return not self.violations


def default_validation_grid(target: TargetSpec, lo=-6.0, hi=6.0, points=241) -> np.ndarray:
    """Generic-offset lattice; the offset keeps FD steps away from potential kinks."""
    offset = 0.0123456789
    if target.dim == 1:
        return (np.linspace(lo, hi, points) + offset)[:, None]
    if target.dim == 2:
        ax = np.linspace(lo, hi, max(9, points // 6)) + offset
        g1, g2 = np.meshgrid(ax, ax, indexing="ij")
        return np.column_stack([g1.ravel(), g2.ravel()])
    raise UnsupportedOperationError("validation grids support dim <= 2")


def _fd_check(evaluate, pts: np.ndarray):
    """Max relative FD error of grad (vs g) and hess (vs grad), scale-1 floor."""
    m, n = pts.shape
    h = 1e-5 * np.maximum(1.0, np.linalg.norm(pts, axis=1))
    g, grad, hess = evaluate(pts)
    grad_err = 0.0
    hess_err = 0.0
    for i in range(n):
        shift = np.zeros((m, n))
        shift[:, i] = h
        gp, gradp, _ = evaluate(pts + shift)
        gm, gradm, _ = evaluate(pts - shift)
        fd_g = (gp - gm) / (2.0 * h)
        grad_err = max(grad_err, float(np.max(np.abs(fd_g - grad[:, i])
                                              / np.maximum(1.0, np.abs(grad[:, i])))))
        fd_h = (gradp - gradm) / (2.0 * h)[:, None]
        denom = np.maximum(1.0, np.abs(hess[:, :, i]))
        hess_err = max(hess_err, float(np.max(np.abs(fd_h - hess[:, :, i]) / denom)))
    return grad_err, hess_err


def _support_samples(spec: CompactMeasureSpec) -> np.ndarray:
    if spec.form == FORM_POINTS:
        return spec.points
    if spec.form == FORM_SEGMENTS:
        samples = [np.linspace(a, b, 33)[:, None] for a, b in spec.intervals]
        return np.vstack(samples)
    out = []
    for x0, x1, y0, y1 in spec.rects:
        gx, gy = np.meshgrid(np.linspace(x0, x1, 17), np.linspace(y0, y1, 17),
                             indexing="ij")
        out.append(np.column_stack([gx.ravel(), gy.ravel()]))
    return np.vstack(out)


def validate_metadata(target: TargetSpec, grid: Optional[np.ndarray] = None) -> MetadataReport:
    """Check declared metadata against the evaluator (or support) on a grid."""
    if target.kind == KIND_COMPACT:
        spec = target.compact
        pts = _support_samples(spec)
        max_norm = float(np.linalg.norm(pts, axis=1).max())
        violations = []
        if max_norm > spec.radius + 1e-12:
            violations.append(
                f"support point at norm {max_norm:.6g} outside radius {spec.radius:.6g}")
        return MetadataReport(name=target.name, kind=target.kind,
                              declared={"radius": spec.radius},
                              observed={"support_norm_max": max_norm},
                              violations=tuple(violations))

    spec = as_smooth(target)
    if grid is None:
        grid = default_validation_grid(target)
    pts = np.atleast_2d(np.asarray(grid, dtype=np.float64))
    g, grad, hess = spec.g(pts)
    if not (np.isfinite(g).all() and np.isfinite(grad).all() and np.isfinite(hess).all()):
        raise EvaluationDomainError("potential evaluator non-finite on validation grid")
    eigs = np.linalg.eigvalsh(hess)
    obs_m0 = max(0.0, float(-eigs.min()))
    obs_m1 = max(0.0, float(eigs.max()))
    obs_lip = max(obs_m0, obs_m1)
    norms = np.linalg.norm(grad, axis=1)
    growth_c = float((norms / (1.0 + np.linalg.norm(pts, axis=1))).max())

    g0 = float(spec.g(np.zeros((1, spec.dim)))[0][0])
    sq = 0.5 * (pts * pts).sum(axis=1)
    general_violation = max(0.0, float((g0 - g - spec.alpha2 * sq - spec.alpha1).max()))

    dist0 = np.linalg.norm(pts - spec.x0[None, :], axis=1)
    beta_violation = max(0.0, float((norms - spec.beta1 * dist0 - spec.beta2).max()))

    fd_grad, fd_hess = _fd_check(spec.g, pts)

    tol = 1e-9
    violations = []
    if obs_m0 > spec.m0 * (1 + tol) + tol:
        violations.append(f"observed m0 {obs_m0:.6g} exceeds declared {spec.m0:.6g}")
    if obs_m1 > spec.m1 * (1 + tol) + tol:
        violations.append(f"observed m1 {obs_m1:.6g} exceeds declared {spec.m1:.6g}")
    if obs_lip > spec.lip * (1 + tol) + tol:
        violations.append(f"observed lip {obs_lip:.6g} exceeds declared {spec.lip:.6g}")
    if general_violation > 1e-9:
        violations.append(f"quadratic lower-growth violated by {general_violation:.6g}")
    if beta_violation > 1e-9:
        violations.append(f"gradient linear-growth violated by {beta_violation:.6g}")
    if fd_grad > 1e-6:
        violations.append(f"fd grad mismatch {fd_grad:.3g}")
    if fd_hess > 1e-5:
        violations.append(f"fd hess mismatch {fd_hess:.3g}")

    return MetadataReport(
        name=target.name, kind=target.kind,
        declared={"m0": spec.m0, "m1": spec.m1, "lip": spec.lip,
                  "alpha1": spec.alpha1, "alpha2": spec.alpha2,
                  "beta1": spec.beta1, "beta2": spec.beta2},
        observed={"m0": obs_m0, "m1": obs_m1, "lip": obs_lip,
                  "growth_constant": growth_c,
                  "general_violation": general_violation,
                  "beta_violation": beta_violation},
        violations=tuple(violations),
        fd_grad_rel=fd_grad, fd_hess_rel=fd_hess)
