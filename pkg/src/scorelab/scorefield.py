"""Exact score fields of the noising process.

The forward process is the standard Ornstein-Uhlenbeck relaxation
``dX = -X/2 dt + dW``.  All second-order structure of its score lives in a
heat-clock potential: with ``t_bar = 1 - e^{-t}``, the tilted initial density
``h = exp(-g)`` smoothed by a Gaussian of variance ``t_bar`` has potential
``qbar(t_bar, .) = -log pbar``, and

    score(t, x)     = -e^{-t/2} grad_qbar(t_bar, e^{-t/2} x) - x
    score_jac(t, x) = -e^{-t}   hess_qbar(t_bar, e^{-t/2} x) - I

Three evaluation paths: Gauss-Hermite quadrature against a smooth potential
(the kernel is absorbed into the Hermite weight by the substitution
``y -> x - sqrt(2 t_bar) y``), exact closed forms for Gaussian mixtures, and
weighted Gaussian moments for compactly supported measures.

For compact initial data there is no tilted density; the heat-clock object is
the plain Gaussian smoothing of the measure (``log_pbar`` is the unnormalized
kernel integral), and the forward-clock score uses the change of variables
``tau = e^t - 1``, ``u = e^{t/2} x`` instead of the tilted transform.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import roots_hermite

from . import _kernels
from .errors import (ContractError, EvaluationDomainError, QuadratureError,
                     SpecError, UnsupportedOperationError)
from .targets import (FORM_POINTS, FORM_SEGMENTS, KIND_COMPACT, KIND_MIXTURE,
                      KIND_SMOOTH, CompactMeasureSpec, GaussianMixtureSpec,
                      SmoothPotentialSpec, TargetSpec,
                      _mixture_log_density_parts, as_smooth, mixture_at_time)

METHOD_QUADRATURE = "quadrature"
METHOD_CLOSED_FORM = "closed_form"
METHOD_MOMENTS = "moments"

_DEFAULT_GH_ORDER = {1: 200, 2: 96}


@dataclass(frozen=True)
class QuadratureConfig:
    """Engine tuning knobs.

    ``gh_order`` is the Gauss-Hermite node count per axis (None picks 200 in
    1D, 96 per axis in 2D).  The compact-measure grid is fine within a window
    of radius ``compact_fine_radius_factor * sqrt(t)`` around the evaluation
    point at spacing ``compact_fine_spacing_factor * sqrt(t)``, and coarse
    elsewhere with ``compact_coarse_cells`` cells per axis.
    """

    gh_order: Optional[int] = None
    compact_fine_spacing_factor: float = 0.125
    compact_fine_radius_factor: float = 8.0
    compact_coarse_cells: int = 512

    def __post_init__(self):
        if self.gh_order is not None and self.gh_order < 8:
            raise SpecError("gh_order must be at least 8")
        if not (0 < self.compact_fine_spacing_factor <= 0.25):
            raise SpecError("fine spacing factor must lie in (0, 1/4]")
        if self.compact_fine_radius_factor < 4:
            raise SpecError("fine radius factor must be at least 4")
        if self.compact_coarse_cells < 1:
            raise SpecError("coarse cell count must be positive")

    def resolved_order(self, dim: int) -> int:
        if self.gh_order is not None:
            return self.gh_order
        order = _DEFAULT_GH_ORDER.get(dim)
        if order is None:
            raise UnsupportedOperationError("quadrature supports dim <= 2")
        return order


_DEFAULT_CFG = QuadratureConfig()


@dataclass(frozen=True)
class ScoreEval:
    """Heat-clock field values at a single point.

    ``qbar_t`` and ``grad_qbar_t`` are populated only when time derivatives
    were requested (smooth targets only).
    """

    t_bar: float
    x: np.ndarray
    log_pbar: float
    grad_qbar: np.ndarray
    hess_qbar: np.ndarray
    qbar_t: Optional[float] = None
    grad_qbar_t: Optional[np.ndarray] = None


@dataclass(frozen=True)
class QbarField:
    """Batch heat-clock field values aligned with ``pts``.

    ``qbar_t`` comes from the heat-equation trace identity
    ``qbar_t = (tr hess - |grad|^2) / 2``; ``qbar_t_alt`` (quadrature only)
    re-derives it from the in-kernel displacement sum, and the gap between
    the two is a quadrature self-check.  ``mat_a`` (quadrature only, on
    request) is the Gibbs average of the potential Hessian, the matrix that
    dominates ``hess_qbar`` from above.
    """

    t_bar: float
    pts: np.ndarray
    log_pbar: np.ndarray
    grad_qbar: np.ndarray
    hess_qbar: np.ndarray
    method: str
    order: Optional[int] = None
    qbar_t: Optional[np.ndarray] = None
    qbar_t_alt: Optional[np.ndarray] = None
    grad_qbar_t: Optional[np.ndarray] = None
    mat_a: Optional[np.ndarray] = None


def heat_time(t):
    """Forward time t >= 0 to heat-clock time t_bar = 1 - e^{-t}."""
    arr = np.asarray(t, dtype=np.float64)
    if np.any(arr < 0):
        raise SpecError("forward time must be nonnegative")
    out = -np.expm1(-arr)
    return float(out) if arr.ndim == 0 else out


def forward_time(t_bar):
    """Heat-clock time t_bar in [0, 1) back to forward time."""
    arr = np.asarray(t_bar, dtype=np.float64)
    if np.any(arr < 0) or np.any(arr >= 1):
        raise SpecError("heat-clock time must lie in [0, 1)")
    out = -np.log1p(-arr)
    return float(out) if arr.ndim == 0 else out


@functools.lru_cache(maxsize=32)
def gauss_hermite_rule(order: int):
    """Nodes and weights for integrals of e^{-z^2} f(z), cached, read-only."""
    if order < 1:
        raise SpecError("quadrature order must be positive")
    nodes, weights = roots_hermite(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _gh_tensor(order: int, dim: int):
    z, w = gauss_hermite_rule(order)
    if dim == 1:
        return z[:, None], w
    if dim == 2:
        z1, z2 = np.meshgrid(z, z, indexing="ij")
        return np.column_stack([z1.ravel(), z2.ravel()]), np.outer(w, w).ravel()
    raise UnsupportedOperationError("quadrature supports dim <= 2")


def _as_points(pts, dim):
    pts = np.asarray(pts, dtype=np.float64)
    if pts.ndim == 0 and dim == 1:
        pts = pts[None, None]
    elif pts.ndim == 1:
        pts = pts[:, None] if dim == 1 else pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != dim:
        raise SpecError(f"points must have shape (m, {dim})")
    return pts


# ---------------------------------------------------------------------------
# quadrature path


def smooth_qbar(spec: SmoothPotentialSpec, t_bar: float, pts,
                cfg: Optional[QuadratureConfig] = None,
                want_time: bool = False, want_parts: bool = False) -> QbarField:
    """Gauss-Hermite evaluation of the heat-clock fields of a smooth potential."""
    if t_bar < 0:
        raise SpecError("t_bar must be nonnegative")
    if want_time and t_bar <= 0:
        raise SpecError("time derivatives need t_bar > 0")
    cfg = cfg or _DEFAULT_CFG
    n = spec.dim
    pts = _as_points(pts, n)
    order = cfg.resolved_order(n)
    Z, W = _gh_tensor(order, n)
    Q = Z.shape[0]
    m = pts.shape[0]
    scale = math.sqrt(2.0 * t_bar)
    half_log_pi = 0.5 * n * math.log(math.pi)

    log_pbar = np.empty(m)
    grad = np.empty((m, n))
    hess = np.empty((m, n, n))
    qt = np.empty(m) if want_time else None
    qt_alt = np.empty(m) if want_time else None
    gqt = np.empty((m, n)) if want_time else None
    mat_a = np.empty((m, n, n)) if want_parts else None

    chunk = max(1, 2_000_000 // Q)
    for lo in range(0, m, chunk):
        hi = min(m, lo + chunk)
        X = pts[lo:hi]
        c = X.shape[0]
        U = (X[:, None, :] - scale * Z[None, :, :]).reshape(c * Q, n)
        gv, gr, he = spec.g(U)
        gv = np.asarray(gv, dtype=np.float64).reshape(c, Q)
        gr = np.asarray(gr, dtype=np.float64).reshape(c, Q, n)
        he = np.asarray(he, dtype=np.float64).reshape(c, Q, n, n)

        s = -gv
        mx = s.max(axis=1)
        if not np.isfinite(mx).all():
            raise QuadratureError("potential non-finite on quadrature nodes",
                                  t_bar=t_bar, order=order)
        with np.errstate(under="ignore"):
            om = W[None, :] * np.exp(s - mx[:, None])
        S0 = om.sum(axis=1)
        if not (np.isfinite(S0).all() and (S0 > 0).all()):
            raise QuadratureError("quadrature mass vanished or overflowed",
                                  t_bar=t_bar, order=order)
        r = om / S0[:, None]

        log_pbar[lo:hi] = mx + np.log(S0) - half_log_pi
        Eg = np.einsum("cq,cqi->ci", r, gr)
        A = np.einsum("cq,cqij->cij", r, he)
        B = np.einsum("cq,cqi,cqj->cij", r, gr, gr)
        H = A - B + Eg[:, :, None] * Eg[:, None, :]
        H = 0.5 * (H + H.transpose(0, 2, 1))
        grad[lo:hi] = Eg
        hess[lo:hi] = H
        if want_parts:
            mat_a[lo:hi] = 0.5 * (A + A.transpose(0, 2, 1))

        if want_time:
            tr = np.einsum("cii->c", H)
            qt[lo:hi] = 0.5 * (tr - (Eg * Eg).sum(axis=1))
            gz = np.einsum("cqi,qi->cq", gr, Z)
            qt_int = -np.einsum("cq,cq->c", r, gz) / scale
            qt_alt[lo:hi] = qt_int
            C = np.einsum("cq,cqij,qj->ci", r, he, Z) / scale
            D = np.einsum("cq,cq,cqi->ci", r, gz, gr) / scale
            gqt[lo:hi] = D - C + qt_int[:, None] * Eg

    return QbarField(t_bar=float(t_bar), pts=pts, log_pbar=log_pbar,
                     grad_qbar=grad, hess_qbar=hess,
                     method=METHOD_QUADRATURE, order=order,
                     qbar_t=qt, qbar_t_alt=qt_alt, grad_qbar_t=gqt,
                     mat_a=mat_a)


# ---------------------------------------------------------------------------
# closed form for mixtures


def mixture_qbar(mix: GaussianMixtureSpec, t_bar: float, pts,
                 want_time: bool = False) -> QbarField:
    """Exact heat-clock fields of a Gaussian mixture.

    Component j contributes a Gaussian with effective variance
    ``vt_j = v_j (1 - t_bar) + t_bar``; the formulas stay valid for any
    t_bar >= 0 with all vt_j > 0 (in particular past t_bar = 1).
    """
    if t_bar < 0:
        raise SpecError("t_bar must be nonnegative")
    if want_time and t_bar <= 0:
        raise SpecError("time derivatives need t_bar > 0")
    n = mix.dim
    pts = _as_points(pts, n)
    v = mix.variances
    mu = mix.means
    vt = v * (1.0 - t_bar) + t_bar
    if np.any(vt <= 0):
        raise EvaluationDomainError("mixture closed form degenerate at this t_bar")

    x2 = (pts * pts).sum(axis=1)
    const = (np.log(mix.weights) - 0.5 * n * np.log(2.0 * math.pi * vt)
             - 0.5 * (1.0 - t_bar) * (mu * mu).sum(axis=1) / vt)
    lin = pts @ (mu / vt[:, None]).T
    l = const[None, :] + 0.5 * ((v - 1.0) / vt)[None, :] * x2[:, None] + lin
    mx = l.max(axis=1)
    with np.errstate(under="ignore"):
        r = np.exp(l - mx[:, None])
    S = r.sum(axis=1)
    log_pbar = mx + np.log(S)
    r /= S[:, None]

    c = (v - 1.0) / vt
    dl = c[None, :, None] * pts[:, None, :] + (mu / vt[:, None])[None, :, :]
    Edl = np.einsum("mk,mkn->mn", r, dl)
    Ec = r @ c
    cov_dl = (np.einsum("mk,mki,mkj->mij", r, dl, dl)
              - Edl[:, :, None] * Edl[:, None, :])
    eye = np.eye(n)
    grad = -Edl
    hess = -(Ec[:, None, None] * eye[None, :, :] + cov_dl)

    qt = gqt = None
    if want_time:
        tr = np.einsum("mii->m", hess)
        qt = 0.5 * (tr - (grad * grad).sum(axis=1))
        # grad of tr(hess) via the third log-derivative of the mixture:
        # d3 log pbar = 3 sym(delta x gamma) + third cumulant of dl
        gamma = np.einsum("mk,k,mkn->mn", r, c, dl) - Ec[:, None] * Edl
        d = dl - Edl[:, None, :]
        kappa_tr = np.einsum("mk,mk,mkn->mn", r, (d * d).sum(axis=2), d)
        grad_tr_hess = -((n + 2) * gamma + kappa_tr)
        gqt = 0.5 * grad_tr_hess - np.einsum("mij,mj->mi", hess, grad)

    return QbarField(t_bar=float(t_bar), pts=pts, log_pbar=log_pbar,
                     grad_qbar=grad, hess_qbar=hess,
                     method=METHOD_CLOSED_FORM,
                     qbar_t=qt, grad_qbar_t=gqt)


def closed_form_mixture(spec: GaussianMixtureSpec, t: float, pts):
    """Forward-clock score and Jacobian of the noised mixture law, exactly.

    Accepts a single point or a batch; returns arrays of matching leading
    shape.  This is the analytic oracle for the quadrature engine and the
    exact score source for the sampler.
    """
    if t < 0:
        raise SpecError("forward time must be nonnegative")
    single = np.asarray(pts).ndim <= 1
    law = mixture_at_time(spec, t)
    pts = _as_points(pts, law.dim)
    _, resp, comp_scores = _mixture_log_density_parts(law, pts)
    score = np.einsum("mk,mkn->mn", resp, comp_scores)
    eye = np.eye(law.dim)
    iv = (1.0 / law.variances)[None, :, None, None]
    jac = np.einsum("mk,mkij->mij", resp,
                    comp_scores[:, :, :, None] * comp_scores[:, :, None, :]
                    - iv * eye)
    jac -= score[:, :, None] * score[:, None, :]
    if single:
        return score[0], jac[0]
    return score, jac


# ---------------------------------------------------------------------------
# moments path for compact measures


def _segment_cells(spec, t_bar, x, cfg):
    iv = spec.intervals
    extent = iv[:, 1].max() - iv[:, 0].min()
    dc = extent / cfg.compact_coarse_cells
    rad = cfg.compact_fine_radius_factor * math.sqrt(t_bar)
    df = cfg.compact_fine_spacing_factor * math.sqrt(t_bar)
    wl, wr = x[0] - rad, x[0] + rad
    mids = []
    lens = []
    for a, b in iv:
        ncells = max(1, int(math.ceil((b - a) / dc)))
        width = (b - a) / ncells
        edges = a + width * np.arange(ncells + 1)
        lo, hi = edges[:-1], edges[1:]
        near = (hi > wl) & (lo < wr)
        sub = int(math.ceil(width / df)) if width > df else 1
        far = ~near
        if far.any():
            mids.append(0.5 * (lo[far] + hi[far]))
            lens.append(np.full(int(far.sum()), width))
        if near.any():
            if sub > 1:
                sw = width / sub
                fine = (lo[near][:, None] + sw * (np.arange(sub) + 0.5)[None, :]).ravel()
                mids.append(fine)
                lens.append(np.full(fine.size, sw))
            else:
                mids.append(0.5 * (lo[near] + hi[near]))
                lens.append(np.full(int(near.sum()), width))
    return np.concatenate(mids)[:, None], np.concatenate(lens)


def _rect_cells(spec, t_bar, x, cfg):
    rc = spec.rects
    dcx = (rc[:, 1].max() - rc[:, 0].min()) / cfg.compact_coarse_cells
    dcy = (rc[:, 3].max() - rc[:, 2].min()) / cfg.compact_coarse_cells
    rad = cfg.compact_fine_radius_factor * math.sqrt(t_bar)
    df = cfg.compact_fine_spacing_factor * math.sqrt(t_bar)
    pts_out = []
    areas = []
    for x0, x1, y0, y1 in rc:
        nx = max(1, int(math.ceil((x1 - x0) / dcx)))
        ny = max(1, int(math.ceil((y1 - y0) / dcy)))
        wx, wy = (x1 - x0) / nx, (y1 - y0) / ny
        ex = x0 + wx * np.arange(nx + 1)
        ey = y0 + wy * np.arange(ny + 1)
        near_x = (ex[1:] > x[0] - rad) & (ex[:-1] < x[0] + rad)
        near_y = (ey[1:] > x[1] - rad) & (ey[:-1] < x[1] + rad)
        near = near_x[:, None] & near_y[None, :]
        sx = int(math.ceil(wx / df)) if wx > df else 1
        sy = int(math.ceil(wy / df)) if wy > df else 1
        cx = 0.5 * (ex[:-1] + ex[1:])
        cy = 0.5 * (ey[:-1] + ey[1:])
        gx, gy = np.meshgrid(cx, cy, indexing="ij")
        far = ~near
        if far.any():
            pts_out.append(np.column_stack([gx[far], gy[far]]))
            areas.append(np.full(int(far.sum()), wx * wy))
        if near.any():
            if sx > 1 or sy > 1:
                # refinement respects the cell partition: sub-lattice per cell
                offx = wx / sx * (np.arange(sx) + 0.5)
                offy = wy / sy * (np.arange(sy) + 0.5)
                corner = np.column_stack([gx[near], gy[near]]) - 0.5 * np.array([wx, wy])
                fx = corner[:, 0][:, None] + offx[None, :]
                fy = corner[:, 1][:, None] + offy[None, :]
                fxx = np.repeat(fx, sy, axis=1)
                fyy = np.tile(fy, (1, sx))
                pts_out.append(np.column_stack([fxx.ravel(), fyy.ravel()]))
                areas.append(np.full(fxx.size, wx * wy / (sx * sy)))
            else:
                pts_out.append(np.column_stack([gx[near], gy[near]]))
                areas.append(np.full(int(near.sum()), wx * wy))
    return np.vstack(pts_out), np.concatenate(areas)


def compact_quadrature_grid(spec: CompactMeasureSpec, t_bar: float, x,
                            cfg: Optional[QuadratureConfig] = None):
    """Midpoint grid for one evaluation point: fine near ``x``, coarse on the
    rest of the support; the two parts partition the support exactly.

    Returns (points (Q, n), log probability weights (Q,)).
    """
    cfg = cfg or _DEFAULT_CFG
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if spec.form == FORM_POINTS:
        return spec.points, np.log(spec.weights)
    if t_bar <= 0:
        raise EvaluationDomainError("compact quadrature needs t_bar > 0")
    if spec.form == FORM_SEGMENTS:
        pts, meas = _segment_cells(spec, t_bar, x, cfg)
    else:
        pts, meas = _rect_cells(spec, t_bar, x, cfg)
    logw = np.log(meas) - math.log(spec.total_measure())
    return pts, logw


def _compact_moments_raw(spec: CompactMeasureSpec, t_bar: float, x, cfg):
    nodes, logw = compact_quadrature_grid(spec, t_bar, x, cfg)
    log_mass, mean, cov = _kernels.weighted_gaussian_moments(
        np.ascontiguousarray(nodes), np.ascontiguousarray(logw), x, t_bar)
    if not math.isfinite(log_mass):
        raise QuadratureError("kernel mass underflowed away from support",
                              t_bar=t_bar, x=tuple(x.tolist()))
    # two-pass central moments keep cov PSD to roundoff; clamp that band
    evals, evecs = np.linalg.eigh(cov)
    floor = -1e-12 * max(1.0, float(np.trace(cov)))
    if evals.min() < floor:
        raise QuadratureError("covariance lost positivity",
                              t_bar=t_bar, min_eig=float(evals.min()))
    cov = (evecs * np.maximum(evals, 0.0)) @ evecs.T
    return log_mass, mean, cov


def compact_moments(target, t_bar: float, x,
                    cfg: Optional[QuadratureConfig] = None):
    """Kernel mass, Gibbs mean and covariance of a compact measure at ``x``.

    Returns ``(log_phat, ybar, cov)`` with ``log_phat`` the log of
    ``int exp(-|x-y|^2/(2 t_bar)) dpi0(y)``.  Covariance eigenvalues in
    ``[-1e-12, 0)`` (scaled by trace) are clamped to 0; anything lower is an
    engine failure and raises.
    """
    spec = target.compact if isinstance(target, TargetSpec) else target
    if not isinstance(spec, CompactMeasureSpec):
        raise UnsupportedOperationError("compact moments need a compact measure")
    if not (0 < t_bar <= 1):
        raise EvaluationDomainError("t_bar must lie in (0, 1]")
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape != (spec.dim,):
        raise SpecError(f"x must have shape ({spec.dim},)")
    return _compact_moments_raw(spec, t_bar, x, cfg)


def compact_qbar(spec: CompactMeasureSpec, t_bar: float, pts,
                 cfg: Optional[QuadratureConfig] = None) -> QbarField:
    """Heat-clock fields of a compactly supported measure, by Gaussian moments.

    ``log_pbar`` is the unnormalized kernel integral.  The gradient and
    Hessian are exact functions of the Gibbs mean and covariance:
    ``grad = (x - ybar)/t_bar``, ``hess = I/t_bar - cov/t_bar^2``.  Time
    derivatives are not available on this path.
    """
    if t_bar <= 0:
        raise EvaluationDomainError("compact fields need t_bar > 0")
    n = spec.dim
    pts = _as_points(pts, n)
    m = pts.shape[0]
    log_pbar = np.empty(m)
    grad = np.empty((m, n))
    hess = np.empty((m, n, n))
    eye = np.eye(n)
    for i in range(m):
        log_mass, mean, cov = _compact_moments_raw(spec, t_bar, pts[i], cfg)
        log_pbar[i] = log_mass
        grad[i] = (pts[i] - mean) / t_bar
        hess[i] = eye / t_bar - cov / (t_bar * t_bar)
    return QbarField(t_bar=float(t_bar), pts=pts, log_pbar=log_pbar,
                     grad_qbar=grad, hess_qbar=hess, method=METHOD_MOMENTS)


# ---------------------------------------------------------------------------
# dispatch and the single-point contract surface


def _dispatch(target, method):
    if isinstance(target, GaussianMixtureSpec):
        kind, payload = KIND_MIXTURE, target
    elif isinstance(target, SmoothPotentialSpec):
        kind, payload = KIND_SMOOTH, target
    elif isinstance(target, CompactMeasureSpec):
        kind, payload = KIND_COMPACT, target
    elif isinstance(target, TargetSpec):
        kind = target.kind
        payload = target.mixture or target.smooth or target.compact
    else:
        raise SpecError(f"cannot evaluate fields for {type(target).__name__}")

    if method == "auto":
        method = {KIND_MIXTURE: METHOD_CLOSED_FORM,
                  KIND_SMOOTH: METHOD_QUADRATURE,
                  KIND_COMPACT: METHOD_MOMENTS}[kind]

    if method == METHOD_QUADRATURE:
        if kind == KIND_COMPACT:
            raise UnsupportedOperationError("compact measures have no smooth potential")
        if kind == KIND_SMOOTH:
            return method, payload
        wrapper = target if isinstance(target, TargetSpec) else TargetSpec(
            kind=KIND_MIXTURE, dim=payload.dim, mixture=payload)
        return method, as_smooth(wrapper)
    if method == METHOD_CLOSED_FORM:
        if kind == KIND_MIXTURE:
            return method, payload
        if isinstance(target, TargetSpec) and target.mixture_equivalent is not None:
            return method, target.mixture_equivalent
        raise UnsupportedOperationError("no exact mixture form for this target")
    if method == METHOD_MOMENTS:
        if kind != KIND_COMPACT:
            raise UnsupportedOperationError("moments path needs a compact measure")
        return method, payload
    raise SpecError(f"unknown method {method!r}")


def qbar_field(target, t_bar: float, pts, *, method: str = "auto",
               cfg: Optional[QuadratureConfig] = None,
               want_time: bool = False, want_parts: bool = False) -> QbarField:
    """Batch heat-clock fields of a target at time ``t_bar``.

    ``target`` may be a TargetSpec or a bare payload spec; ``method`` is
    ``auto`` (by kind), ``quadrature``, ``closed_form``, or ``moments``.
    """
    resolved, payload = _dispatch(target, method)
    if resolved == METHOD_QUADRATURE:
        return smooth_qbar(payload, t_bar, pts, cfg=cfg, want_time=want_time,
                           want_parts=want_parts)
    if resolved == METHOD_CLOSED_FORM:
        return mixture_qbar(payload, t_bar, pts, want_time=want_time)
    if want_time:
        raise UnsupportedOperationError(
            "time derivatives are not available for compact measures")
    return compact_qbar(payload, t_bar, pts, cfg=cfg)


def _point_field(target, t_bar, x, cfg, want_time=False):
    if not (0 < t_bar <= 1):
        raise EvaluationDomainError("t_bar must lie in (0, 1]")
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    fld = qbar_field(target, t_bar, x[None, :], cfg=cfg, want_time=want_time)
    if not math.isfinite(fld.log_pbar[0]):
        raise QuadratureError("log_pbar non-finite", t_bar=t_bar)
    return fld


def score_eval(target, t_bar: float, x,
               cfg: Optional[QuadratureConfig] = None,
               want_time: bool = False) -> ScoreEval:
    """Single-point heat-clock evaluation bundled as a ScoreEval record."""
    fld = _point_field(target, t_bar, x, cfg, want_time=want_time)
    return ScoreEval(
        t_bar=fld.t_bar, x=fld.pts[0], log_pbar=float(fld.log_pbar[0]),
        grad_qbar=fld.grad_qbar[0], hess_qbar=fld.hess_qbar[0],
        qbar_t=float(fld.qbar_t[0]) if fld.qbar_t is not None else None,
        grad_qbar_t=fld.grad_qbar_t[0] if fld.grad_qbar_t is not None else None)


def log_pbar(target, t_bar: float, x,
             cfg: Optional[QuadratureConfig] = None) -> float:
    """log pbar(t_bar, x); for compact measures the unnormalized kernel mass."""
    return float(_point_field(target, t_bar, x, cfg).log_pbar[0])


def grad_qbar(target, t_bar: float, x,
              cfg: Optional[QuadratureConfig] = None) -> np.ndarray:
    """Gradient of the heat-clock potential at a single point."""
    return _point_field(target, t_bar, x, cfg).grad_qbar[0]


def hess_qbar(target, t_bar: float, x,
              cfg: Optional[QuadratureConfig] = None) -> np.ndarray:
    """Hessian of the heat-clock potential at a single point."""
    return _point_field(target, t_bar, x, cfg).hess_qbar[0]


def qbar_time_derivs(target, t_bar: float, x,
                     cfg: Optional[QuadratureConfig] = None):
    """(qbar_t, grad_qbar_t) at a single point; smooth targets only."""
    fld = _point_field(target, t_bar, x, cfg, want_time=True)
    return float(fld.qbar_t[0]), fld.grad_qbar_t[0]


def q_coords(ev: ScoreEval, t: float):
    """Map a heat-clock evaluation to forward-clock quantities.

    ``ev`` must have been computed at ``t_bar = 1 - e^{-t}`` and point
    ``u = e^{-t/2} x``; returns ``(grad_q, hess_q, score)`` at the forward
    point ``x = e^{t/2} u``.
    """
    if t < 0:
        raise SpecError("forward time must be nonnegative")
    t_bar = heat_time(t)
    if abs(t_bar - ev.t_bar) > 1e-12 * max(1.0, abs(ev.t_bar)):
        raise ContractError(
            f"evaluation at t_bar={ev.t_bar} does not match forward t={t}")
    half = math.exp(-0.5 * t)
    grad_q = half * ev.grad_qbar
    hess_q = (half * half) * ev.hess_qbar
    x = ev.x / half
    score = -grad_q - x
    return grad_q, hess_q, score


def score_field(target, t: float, pts, *, method: str = "auto",
                cfg: Optional[QuadratureConfig] = None):
    """Forward-clock score and Jacobian of the noised law, batched.

    Smooth and mixture targets go through the tilted heat-clock potential;
    compact measures use the direct change of variables ``tau = e^t - 1``,
    ``u = e^{t/2} x`` on the plain smoothed measure.
    """
    if t < 0:
        raise SpecError("forward time must be nonnegative")
    resolved, payload = _dispatch(target, method)
    pts = _as_points(pts, payload.dim)
    eye = np.eye(payload.dim)
    if resolved == METHOD_MOMENTS:
        if t <= 0:
            raise EvaluationDomainError("compact score needs t > 0")
        tau = math.expm1(t)
        half = math.exp(0.5 * t)
        fld = compact_qbar(payload, tau, half * pts, cfg=cfg)
        score = -half * fld.grad_qbar
        jac = -math.exp(t) * fld.hess_qbar
    else:
        t_bar = heat_time(t)
        half = math.exp(-0.5 * t)
        if resolved == METHOD_CLOSED_FORM:
            fld = mixture_qbar(payload, t_bar, half * pts)
        else:
            fld = smooth_qbar(payload, t_bar, half * pts, cfg=cfg)
        score = -half * fld.grad_qbar - pts
        jac = -math.exp(-t) * fld.hess_qbar - eye[None, :, :]
    return score, jac
