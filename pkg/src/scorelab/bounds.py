"""Explicit bound formulas for score regularity, and sweep verification.

Each bound calculator is a pure formula; ``sweep_verify`` evaluates the
matching observed quantity through the field engine on a (time, space) grid
and reports signed margins.  Every check runs in the clock its statement
lives in: finite-time Hessian bounds and the score-Lipschitz constant in the
forward clock (on ``hess_q = e^{-t} hess_qbar``), gradient/Hessian/time
estimates for the heat-clock potential directly on ``qbar`` quantities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import scorefield
from .errors import (HorizonExceededError, SpecError,
                     UnsupportedOperationError)
from .scorefield import QuadratureConfig, forward_time, heat_time, qbar_field
from .targets import (KIND_COMPACT, KIND_MIXTURE, KIND_SMOOTH, TargetSpec,
                      as_smooth, eval_potential)

DEFAULT_T_BARS = (0.02, 0.05, 0.1, 0.2, 0.35, 0.45, 0.5, 0.7, 0.9)
DEFAULT_TOLERANCE = 1e-7

THEOREMS = ("thm31", "cor32", "thm33", "thm5", "thm37")


# ---------------------------------------------------------------------------
# formula calculators


def thm31_bounds(m0: float, m1: float, t: float):
    """Finite-time eigenvalue bounds for the forward-clock Hessian of q.

    Returns ``(upper, lower, horizon)``: ``upper = e^{-t} m1`` always;
    ``lower = -m0 / (e^t - m0 (e^t - 1))`` while t is below the blow-up
    horizon ``-log(1 - 1/m0)`` (infinite for m0 <= 1), and ``-inf`` past it.
    """
    if m0 < 0 or m1 < 0:
        raise SpecError("m0 and m1 must be nonnegative")
    if t < 0:
        raise SpecError("forward time must be nonnegative")
    horizon = math.inf if m0 <= 1 else math.log(m0 / (m0 - 1.0))
    upper = math.exp(-t) * m1
    if t < horizon:
        denom = math.exp(t) * (1.0 - m0) + m0
        lower = -m0 / denom
    else:
        lower = -math.inf
    return upper, lower, horizon


def cor32_Ct(l0: float, l1: float, t: float) -> float:
    """Uniform short-time bound on the Hessian of -log p_t.

    ``l0`` and ``l1`` bound -D^2 log p0 from below (by -l0) and above.  For
    log-concave data (l0 <= 0) the bound ``e^{-t} l1 + (1 - e^{-t})`` holds
    for all t; otherwise the stated horizon is ``-log(1 - 1/(l0+1))``.  Note
    the growing branch degenerates earlier, at ``e^t - 1 = 1/(l0+1)``; sweeps
    flag points past that, this calculator only enforces the stated horizon.
    """
    if t < 0:
        raise SpecError("forward time must be nonnegative")
    decay = math.exp(-t)
    branch_flat = decay * (l1 - 1.0) + 1.0
    if l0 <= 0:
        return branch_flat
    horizon = math.log((l0 + 1.0) / l0)
    if t >= horizon:
        raise HorizonExceededError(
            f"t={t:.6g} is past the stated horizon {horizon:.6g}")
    denom = 1.0 - (l0 + 1.0) * math.expm1(t)
    branch_grow = (l0 + 1.0) / denom - 1.0 if denom != 0 else -math.inf
    return max(branch_grow, branch_flat)


def cor32_growth_domain(l0: float) -> float:
    """Largest heat-clock time before the growing branch of cor32 degenerates.

    Returns ``1 / (l0 + 2)`` for l0 > 0 (in t_bar units) and 1.0 otherwise.
    """
    if l0 <= 0:
        return 1.0
    return 1.0 / (l0 + 2.0)


def prior_horizon(lip: float) -> float:
    """Horizon guaranteed by the prior comparison condition
    ``e^{t/2} - e^{-t/2} <= 1/(2 L)``: the largest such t is 2 asinh(1/(4L)).
    """
    if lip <= 0:
        raise SpecError("lip must be positive")
    return 2.0 * math.asinh(1.0 / (4.0 * lip))


def thm33_bounds(spec, t_bar: float, x):
    """Gradient, Hessian, and time-derivative bounds for the heat-clock
    potential of a smooth target, with all constants explicit.

    ``spec`` is a SmoothPotentialSpec (a TargetSpec with a smooth view is
    accepted); returns ``(grad_bound, hess_bound, time_bound)``.  The
    position enters through ``max(|x - x0|, 1)`` for the gradient and
    ``r = max(|x - x0 - grad g(x0)|, 1)`` for the other two.
    """
    if isinstance(spec, TargetSpec):
        spec = as_smooth(spec)
    if not (0 < t_bar <= 1):
        raise SpecError("t_bar must lie in (0, 1]")
    if spec.alpha2 >= 1:
        raise SpecError("alpha2 must be below 1")
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    n = spec.dim
    a1, a2 = spec.alpha1, spec.alpha2
    b1, b2 = spec.beta1, spec.beta2
    lip = spec.lip
    sa = math.sqrt(1.0 - a2)
    dim_term = 4.0 * n * math.log(n) if n > 1 else 0.0

    dist = float(np.linalg.norm(x - spec.x0))
    if b1 == 0.0:
        grad_bound = b2
    else:
        c_n = 2.0 * math.sqrt((n + 3) * math.log(2.0 * (1.0 + 4.0 * b1) / sa)
                              + dim_term + a1 + 1.0 + b2 * b2 / b1)
        c_b = 3.0 * math.sqrt(b1) + 1.0 + 6.0 * a2 / sa
        grad_bound = 3.0 * b1 / sa * max(c_n, c_b * max(dist, 1.0)) + b2

    _, g0_grad, _ = eval_potential(spec, spec.x0)
    r = max(float(np.linalg.norm(x - spec.x0 - g0_grad)), 1.0)
    ct_n = 2.0 * math.sqrt((n + 3) * math.log(2.0 * (1.0 + 4.0 * lip) / sa)
                           + dim_term + a1 + 1.0)
    ct = 3.0 * math.sqrt(lip) + 1.0 + 6.0 * a2 / sa
    hess_bound = (10.0 * lip * lip + lip) / (1.0 - a2) * max(ct_n ** 2, (ct * r) ** 2)
    time_bound = ((48.0 * lip * lip + 2.0 * lip)
                  / (math.sqrt(t_bar) * (1.0 - a2) ** 1.5)
                  * max(ct_n ** 3, (ct * r) ** 3))
    return grad_bound, hess_bound, time_bound


def thm5_bounds(l1: float, l2: float):
    """Bounds under a bounded, Lipschitz initial potential gradient:
    ``|grad_qbar| <= l1`` in the heat clock, and the forward-clock Hessian of
    q sandwiched in ``[-(l2 + l1^2), l2]``.
    """
    if l1 < 0 or l2 < 0:
        raise SpecError("l1 and l2 must be nonnegative")
    return l1, -(l2 + l1 * l1), l2


def thm37_bounds(m: float, t_bar: float, x):
    """Heat-clock gradient and Hessian bounds for support radius ``m``:
    ``(|x| + m)/t`` and ``1/t + m^2/t^2``.
    """
    if m < 0:
        raise SpecError("support radius must be nonnegative")
    if not (0 < t_bar <= 1):
        raise SpecError("t_bar must lie in (0, 1]")
    norm = float(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=np.float64))))
    return (norm + m) / t_bar, 1.0 / t_bar + m * m / (t_bar * t_bar)


def early_stopping_constant(m: float, delta: float) -> float:
    """Score Lipschitz constant surviving early stopping at forward time
    ``delta``: ``1 + 1/delta + m^2/delta^2``.
    """
    if m < 0:
        raise SpecError("support radius must be nonnegative")
    if delta <= 0:
        raise SpecError("delta must be positive")
    return 1.0 + 1.0 / delta + m * m / (delta * delta)


def ht_proxy(l0: float, l1: float, T: float) -> float:
    """Proxy for the horizon-dependent constant of the sampling theorem: the
    maximum of cor32_Ct over [0, T].  Both branches of C_t are monotone in t,
    so the maximum sits at an endpoint.
    """
    if T < 0:
        raise SpecError("T must be nonnegative")
    return max(cor32_Ct(l0, l1, 0.0), cor32_Ct(l0, l1, T))


def kl_predicted(m2: float, n: int, T: float, eps0: float, N: int,
                 lipschitz_proxy: float) -> float:
    """Three-term KL bound with unit absolute constants:
    ``(m2 + n) e^{-T} + T eps0^2 + n T^2 L^2 / N``.
    """
    if min(m2, T, eps0, lipschitz_proxy) < 0 or n < 1 or N < 1:
        raise SpecError("arguments must be positive (N, n >= 1)")
    return ((m2 + n) * math.exp(-T) + T * eps0 * eps0
            + n * T * T * lipschitz_proxy * lipschitz_proxy / N)


# ---------------------------------------------------------------------------
# sweep harness


@dataclass(frozen=True)
class BoundRow:
    """One checked (quantity, time, point) triple.

    ``margin`` is signed slack: bound - observed for upper bounds,
    observed - bound for lower bounds, so margin >= 0 always means satisfied.
    """

    theorem_id: str
    quantity: str
    t_bar: float
    t_forward: float
    x: tuple
    bound: float
    observed: float
    margin: float
    violated: bool


@dataclass(frozen=True)
class BoundReport:
    """Sweep outcome: per-point rows plus grid points flagged as outside the
    theorem's domain (flagged points are not evaluated and carry a reason).
    """

    theorem_id: str
    target_name: str
    tolerance: float
    rows: tuple
    flagged: tuple

    @property
    def violations(self):
        return tuple(r for r in self.rows if r.violated)

    @property
    def ok(self) -> bool:
        return not self.violations

    def worst_margin(self) -> float:
        return min((r.margin for r in self.rows), default=math.inf)


def default_sweep_grid(dim: int, lo: float = -4.0, hi: float = 4.0,
                       points_per_axis: int = 41):
    """The standard sweep lattice: 41 points per axis over [-4, 4]^n."""
    ax = np.linspace(lo, hi, points_per_axis)
    if dim == 1:
        return ax[:, None]
    if dim == 2:
        g1, g2 = np.meshgrid(ax, ax, indexing="ij")
        return np.column_stack([g1.ravel(), g2.ravel()])
    raise UnsupportedOperationError("sweeps support dim <= 2")


def _rows_minmax_eigs(hess_batch):
    eigs = np.linalg.eigvalsh(hess_batch)
    return eigs[:, 0], eigs[:, -1]


def _append_rows(rows, theorem_id, quantity, t_bar, t_fwd, pts, bounds,
                 observed, orientation, tol):
    bounds = np.broadcast_to(np.asarray(bounds, dtype=np.float64), observed.shape)
    for i in range(observed.shape[0]):
        b = float(bounds[i])
        o = float(observed[i])
        margin = b - o if orientation == "upper" else o - b
        rows.append(BoundRow(
            theorem_id=theorem_id, quantity=quantity, t_bar=float(t_bar),
            t_forward=float(t_fwd), x=tuple(pts[i].tolist()), bound=b,
            observed=o, margin=margin, violated=bool(margin < -tol)))


def _sweep_thm31(target, spec, t_bars, pts, cfg, tol, rows, flagged):
    m0, m1 = spec.m0, spec.m1
    for tb in t_bars:
        if tb >= 1.0:
            flagged.append({"t_bar": float(tb), "reason": "forward clock needs t_bar < 1"})
            continue
        t = forward_time(tb)
        upper, lower, horizon = thm31_bounds(m0, m1, t)
        if t >= horizon:
            flagged.append({"t_bar": float(tb), "reason": "past blow-up horizon"})
            continue
        fld = qbar_field(target, tb, pts, cfg=cfg)
        hess_q = math.exp(-t) * fld.hess_qbar
        lo_eig, hi_eig = _rows_minmax_eigs(hess_q)
        _append_rows(rows, "thm31", "hess_q_max_eig", tb, t, pts, upper,
                     hi_eig, "upper", tol)
        _append_rows(rows, "thm31", "hess_q_min_eig", tb, t, pts, lower,
                     lo_eig, "lower", tol)


def _sweep_cor32(target, spec, t_bars, pts, cfg, tol, rows, flagged):
    l0, l1 = spec.m0 - 1.0, spec.m1 + 1.0
    domain = cor32_growth_domain(l0)
    for tb in t_bars:
        if tb >= 1.0:
            flagged.append({"t_bar": float(tb), "reason": "forward clock needs t_bar < 1"})
            continue
        if tb >= domain:
            flagged.append({"t_bar": float(tb),
                            "reason": "growing branch degenerate at this time"})
            continue
        t = forward_time(tb)
        bound = cor32_Ct(l0, l1, t)
        fld = qbar_field(target, tb, pts, cfg=cfg)
        neg_d2_logp = math.exp(-t) * fld.hess_qbar + np.eye(pts.shape[1])
        lo_eig, hi_eig = _rows_minmax_eigs(neg_d2_logp)
        observed = np.maximum(np.abs(lo_eig), np.abs(hi_eig))
        _append_rows(rows, "cor32", "neg_d2_logp_norm", tb, t, pts, bound,
                     observed, "upper", tol)


def _sweep_thm33(target, spec, t_bars, pts, cfg, tol, rows, flagged):
    for tb in t_bars:
        if not (0 < tb <= 1):
            flagged.append({"t_bar": float(tb), "reason": "t_bar outside (0, 1]"})
            continue
        t = forward_time(tb) if tb < 1 else math.inf
        fld = qbar_field(target, tb, pts, cfg=cfg, want_time=True)
        grads = np.linalg.norm(fld.grad_qbar, axis=1)
        lo_eig, hi_eig = _rows_minmax_eigs(fld.hess_qbar)
        hess_norm = np.maximum(np.abs(lo_eig), np.abs(hi_eig))
        time_abs = np.abs(fld.qbar_t)
        triple = [thm33_bounds(spec, tb, pts[i]) for i in range(pts.shape[0])]
        gb = np.array([tr[0] for tr in triple])
        hb = np.array([tr[1] for tr in triple])
        tb_bound = np.array([tr[2] for tr in triple])
        _append_rows(rows, "thm33", "grad_qbar_norm", tb, t, pts, gb, grads,
                     "upper", tol)
        _append_rows(rows, "thm33", "hess_qbar_norm", tb, t, pts, hb,
                     hess_norm, "upper", tol)
        _append_rows(rows, "thm33", "qbar_t_abs", tb, t, pts, tb_bound,
                     time_abs, "upper", tol)


def _sweep_thm5(target, spec, t_bars, pts, cfg, tol, rows, flagged, l1, l2):
    if l1 is None or l2 is None:
        raise SpecError("thm5 sweeps need explicit l1 and l2")
    grad_bound, hess_lower, hess_upper = thm5_bounds(l1, l2)
    for tb in t_bars:
        if tb >= 1.0:
            flagged.append({"t_bar": float(tb), "reason": "forward clock needs t_bar < 1"})
            continue
        t = forward_time(tb)
        fld = qbar_field(target, tb, pts, cfg=cfg)
        grads = np.linalg.norm(fld.grad_qbar, axis=1)
        _append_rows(rows, "thm5", "grad_qbar_norm", tb, t, pts, grad_bound,
                     grads, "upper", tol)
        hess_q = math.exp(-t) * fld.hess_qbar
        lo_eig, hi_eig = _rows_minmax_eigs(hess_q)
        _append_rows(rows, "thm5", "hess_q_max_eig", tb, t, pts, hess_upper,
                     hi_eig, "upper", tol)
        _append_rows(rows, "thm5", "hess_q_min_eig", tb, t, pts, hess_lower,
                     lo_eig, "lower", tol)


def _sweep_thm37(target, compact, t_bars, pts, cfg, tol, rows, flagged):
    m = compact.radius
    for tb in t_bars:
        if not (0 < tb <= 1):
            flagged.append({"t_bar": float(tb), "reason": "t_bar outside (0, 1]"})
            continue
        t = forward_time(tb) if tb < 1 else math.inf
        fld = qbar_field(target, tb, pts, cfg=cfg)
        grads = np.linalg.norm(fld.grad_qbar, axis=1)
        lo_eig, hi_eig = _rows_minmax_eigs(fld.hess_qbar)
        hess_norm = np.maximum(np.abs(lo_eig), np.abs(hi_eig))
        gb = np.array([thm37_bounds(m, tb, pts[i])[0] for i in range(pts.shape[0])])
        hb = 1.0 / tb + m * m / (tb * tb)
        _append_rows(rows, "thm37", "grad_qbar_norm", tb, t, pts, gb, grads,
                     "upper", tol)
        _append_rows(rows, "thm37", "hess_qbar_norm", tb, t, pts, hb,
                     hess_norm, "upper", tol)


def sweep_verify(target: TargetSpec, theorem_id: str, t_bars=None, points=None,
                 cfg: Optional[QuadratureConfig] = None,
                 tolerance: float = DEFAULT_TOLERANCE,
                 l1: Optional[float] = None,
                 l2: Optional[float] = None) -> BoundReport:
    """Check one theorem's bounds against observed fields on a grid.

    Grid points outside the theorem's stated domain are flagged with a
    reason, not evaluated.  ``l1``/``l2`` supply the explicit constants the
    bounded-gradient theorem needs (they are not part of target metadata).
    """
    if theorem_id not in THEOREMS:
        raise SpecError(f"unknown theorem id {theorem_id!r}")
    if not isinstance(target, TargetSpec):
        raise SpecError("sweep_verify needs a TargetSpec")
    t_bars = tuple(float(t) for t in (t_bars if t_bars is not None else DEFAULT_T_BARS))
    if not t_bars:
        raise SpecError("empty time grid")
    if points is None:
        points = default_sweep_grid(target.dim)
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[1] != target.dim or pts.shape[0] == 0:
        raise SpecError("grid points must be nonempty with the target's dim")

    rows: list = []
    flagged: list = []
    if theorem_id == "thm37":
        if target.kind != KIND_COMPACT:
            raise UnsupportedOperationError("thm37 applies to compact measures")
        _sweep_thm37(target, target.compact, t_bars, pts, cfg, tolerance,
                     rows, flagged)
    else:
        if target.kind not in (KIND_SMOOTH, KIND_MIXTURE):
            raise UnsupportedOperationError(
                f"{theorem_id} needs a smooth or mixture target")
        spec = as_smooth(target)
        if theorem_id == "thm31":
            _sweep_thm31(target, spec, t_bars, pts, cfg, tolerance, rows, flagged)
        elif theorem_id == "cor32":
            _sweep_cor32(target, spec, t_bars, pts, cfg, tolerance, rows, flagged)
        elif theorem_id == "thm33":
            _sweep_thm33(target, spec, t_bars, pts, cfg, tolerance, rows, flagged)
        else:
            _sweep_thm5(target, spec, t_bars, pts, cfg, tolerance, rows,
                        flagged, l1, l2)

    return BoundReport(theorem_id=theorem_id, target_name=target.name,
                       tolerance=float(tolerance), rows=tuple(rows),
                       flagged=tuple(flagged))
