"""Compact curvature blocks that defeat any uniform heat-clock Hessian bound.

A block of scale ``s`` carries the potential ``2s^2 - x^2`` on ``|x| <= s``,
rejoining zero quadratically on ``s <= |x| <= 2s``.  Its smoothed log density
at heat time 1/2 has second derivative ``(num_cap + num_shoulder) /
(mass_cap + mass_shoulder + mass_tail)``, which grows like ``s^2/3``; a chain
of blocks with growing scales therefore makes the curvature of ``log pbar``
unbounded at heat time 1/2 while the initial potential keeps ``|g''| <= 2``.

Curvature evaluations here move the x-derivatives onto the Gaussian kernel
(two integrations by parts) before applying Gauss-Hermite: the integrand
stays C^1 across the block kinks, where the direct second-derivative sum
would lose five digits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import QuadratureError, SpecError
from .scorefield import QuadratureConfig, gauss_hermite_rule
from .targets import KIND_SMOOTH, SmoothPotentialSpec, TargetSpec
from .bounds import BoundReport, BoundRow

BLOCK_RATIO_GH_ORDER = 8000
PATH_CLOSED_FORM = "closed_form"
PATH_QUADRATURE = "quadrature"

_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)
_SQRT_PI = math.sqrt(math.pi)


# ---------------------------------------------------------------------------
# error function, series + continued fraction


def _erf_series(x: float) -> float:
    # 2x e^{-x^2}/sqrt(pi) * sum 2^k x^{2k} / (1*3*...*(2k+1)); all terms
    # positive, so no cancellation
    tx2 = 2.0 * x * x
    term = 1.0
    total = 1.0
    k = 0
    while True:
        k += 1
        term *= tx2 / (2 * k + 1)
        total += term
        if term < total * 1e-18 or k > 300:
            break
    return _TWO_OVER_SQRT_PI * x * math.exp(-x * x) * total


def _erfc_cf(x: float) -> float:
    # Lentz continued fraction for erfc, x >= 3:
    # erfc(x) = e^{-x^2}/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    tiny = 1e-300
    f = x if x != 0 else tiny
    c = f
    d = 0.0
    for k in range(1, 200):
        a = 0.5 * k
        d = x + a * d
        d = tiny if d == 0 else d
        c = x + a / c
        c = tiny if c == 0 else c
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-17:
            break
    return math.exp(-x * x) / (_SQRT_PI * f)


def erf(x: float) -> float:
    """Error function, series for |x| < 3 and continued fraction beyond;
    absolute accuracy 1e-14 or better over the real line.
    """
    x = float(x)
    if math.isnan(x):
        return x
    if x < 0:
        return -erf(-x)
    if x < 3.0:
        return _erf_series(x)
    if x < 6.5:
        return 1.0 - _erfc_cf(x)
    return 1.0


def _erfc(x: float) -> float:
    # complement without the 1 - erf cancellation for large x
    x = float(x)
    if x < 0:
        return 2.0 - _erfc(-x)
    if x < 3.0:
        return 1.0 - _erf_series(x)
    return _erfc_cf(x)


# ---------------------------------------------------------------------------
# block potentials


@dataclass(frozen=True)
class BlockSpec:
    """One curvature block: scale and center."""

    scale: float
    center: float = 0.0

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise SpecError("block scale must be positive and finite")

    @property
    def support(self):
        return (self.center - 2.0 * self.scale, self.center + 2.0 * self.scale)


def _block_terms(y, s):
    """(g, g', g'') of the centered block of scale ``s`` at offsets ``y``."""
    ay = np.abs(y)
    g = np.zeros_like(y)
    gp = np.zeros_like(y)
    gpp = np.zeros_like(y)
    cap = ay <= s
    sh = (ay > s) & (ay < 2.0 * s)
    g[cap] = 2.0 * s * s - y[cap] ** 2
    gp[cap] = -2.0 * y[cap]
    gpp[cap] = -2.0
    g[sh] = (ay[sh] - 2.0 * s) ** 2
    gp[sh] = 2.0 * (ay[sh] - 2.0 * s) * np.sign(y[sh])
    gpp[sh] = 2.0
    return g, gp, gpp


def _blocks_evaluator(blocks):
    def evaluate(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        x = pts[:, 0]
        g = np.zeros_like(x)
        gp = np.zeros_like(x)
        gpp = np.zeros_like(x)
        for blk in blocks:
            bg, bgp, bgpp = _block_terms(x - blk.center, blk.scale)
            g += bg
            gp += bgp
            gpp += bgpp
        return g, gp[:, None], gpp[:, None, None]

    return evaluate


def _blocks_g_values(blocks, y):
    g = np.zeros_like(y)
    for blk in blocks:
        g += _block_terms(y - blk.center, blk.scale)[0]
    return g


def _smooth_spec(blocks):
    ev = _blocks_evaluator(blocks)
    g0 = float(ev(np.zeros((1, 1)))[0][0])
    return SmoothPotentialSpec(g=ev, dim=1, m0=2.0, m1=2.0, lip=2.0,
                               alpha1=g0, alpha2=0.0, beta1=2.0, beta2=0.0,
                               x0=np.zeros(1))


def block_target(scale: float, center: float = 0.0) -> TargetSpec:
    """Single-block smooth target; |g''| <= 2 regardless of scale."""
    blk = BlockSpec(scale=float(scale), center=float(center))
    return TargetSpec(kind=KIND_SMOOTH, dim=1,
                      name=f"counterexample_block({blk.scale:g})",
                      smooth=_smooth_spec((blk,)))


@dataclass(frozen=True)
class ChainSpec:
    """Blocks of scale 1..K placed left to right with disjoint supports."""

    blocks: tuple
    margin: float

    def __post_init__(self):
        if not self.blocks:
            raise SpecError("chain needs at least one block")
        if self.margin < 0:
            raise SpecError("margin must be nonnegative")
        if self.blocks[0].center != 0.0:
            raise SpecError("first block must sit at the origin")
        for left, right in zip(self.blocks, self.blocks[1:]):
            gap = right.support[0] - left.support[1]
            if gap < self.margin - 1e-12:
                raise SpecError("block supports closer than the margin")

    @property
    def centers(self):
        return tuple(b.center for b in self.blocks)

    @property
    def scales(self):
        return tuple(b.scale for b in self.blocks)


def assemble_chain(K: int, margin: float = 10.0):
    """Chain of K blocks, scale k at position x_k, x_1 = 0 and
    x_{k+1} = x_k + 2k + 2(k+1) + margin.  Returns (ChainSpec, TargetSpec).
    """
    K = int(K)
    if K < 1:
        raise SpecError("K must be >= 1")
    centers = [0.0]
    for k in range(1, K):
        centers.append(centers[-1] + 2.0 * k + 2.0 * (k + 1) + margin)
    blocks = tuple(BlockSpec(scale=float(k + 1), center=c)
                   for k, c in enumerate(centers))
    chain = ChainSpec(blocks=blocks, margin=float(margin))
    target = TargetSpec(kind=KIND_SMOOTH, dim=1,
                        name=f"counterexample_chain({K})",
                        smooth=_smooth_spec(blocks))
    # normalizability guard: the initial density integrates
    nodes, weights = gauss_hermite_rule(256)
    z = math.sqrt(2.0) * np.asarray(nodes)
    mass = math.sqrt(2.0) * float(weights @ np.exp(-_blocks_g_values(blocks, z)))
    if not (math.isfinite(mass) and mass > 0):
        raise QuadratureError("chain initial mass not finite", mass=mass)
    return chain, target


# ---------------------------------------------------------------------------
# the ratio at heat time 1/2


class BlockRatio(NamedTuple):
    """Ingredients of (log pbar)_xx(1/2, center) for a single block.

    num_* are the half-line pieces of the second x-derivative mass,
    mass_* the half-line pieces of the kernel mass: cap |y| <= s,
    shoulder s < |y| < 2s, tail beyond.  ratio = sum(num)/sum(mass); the
    quadrature path forms it from the unsegmented kernel-side sums (the
    segment fields there are direct node-bucketed estimates, accurate only
    to the node spacing).
    """

    num_cap: float
    num_shoulder: float
    mass_cap: float
    mass_shoulder: float
    mass_tail: float
    ratio: float
    path: str
    order: Optional[int]


def _block_ratio_closed(s: float) -> BlockRatio:
    e2 = math.exp(-2.0 * s * s)
    root8 = math.sqrt(math.pi / 8.0)
    num_cap = e2 * (4.0 * s ** 3 / 3.0 + 2.0 * s)
    num_shoulder = e2 * (s * e2 - 2.0 * s
                         + (4.0 * s * s - 1.0) * root8 * erf(math.sqrt(2.0) * s))
    mass_cap = e2 * s
    mass_shoulder = e2 * root8 * erf(math.sqrt(2.0) * s)
    mass_tail = 0.5 * _SQRT_PI * _erfc(2.0 * s)
    ratio = (num_cap + num_shoulder) / (mass_cap + mass_shoulder + mass_tail)
    return BlockRatio(num_cap, num_shoulder, mass_cap, mass_shoulder,
                      mass_tail, ratio, PATH_CLOSED_FORM, None)


def _block_ratio_quadrature(s: float, order: int) -> BlockRatio:
    nodes, weights = gauss_hermite_rule(order)
    z = np.asarray(nodes)
    g, gp, gpp = _block_terms(z, s)
    h = np.exp(-g)
    # kernel-side sums: d^2/dx^2 moved onto e^{-z^2} gives the (4z^2-2)
    # factor and a C^1 integrand
    total_num = float(weights @ ((4.0 * z * z - 2.0) * h))
    total_mass = float(weights @ h)
    if not (math.isfinite(total_num) and math.isfinite(total_mass)
            and total_mass > 0):
        raise QuadratureError("block ratio sums not finite", scale=s,
                              order=order)
    ratio = total_num / total_mass
    # node-bucketed segment estimates (direct second-derivative integrands)
    az = np.abs(z)
    cap = az <= s
    sh = (az > s) & (az < 2.0 * s)
    d2 = (gp * gp - gpp) * h
    num_cap = 0.5 * float(weights[cap] @ d2[cap])
    num_shoulder = 0.5 * float(weights[sh] @ d2[sh])
    mass_cap = 0.5 * float(weights[cap] @ h[cap])
    mass_shoulder = 0.5 * float(weights[sh] @ h[sh])
    mass_tail = 0.5 * float(weights[~(cap | sh)] @ h[~(cap | sh)])
    return BlockRatio(num_cap, num_shoulder, mass_cap, mass_shoulder,
                      mass_tail, ratio, PATH_QUADRATURE, order)


def block_ratio(scale: float, path: str = PATH_CLOSED_FORM,
                gh_order: Optional[int] = None) -> BlockRatio:
    """(log pbar)_xx at heat time 1/2 at the center of a single block,
    with its five half-line integral pieces.

    The closed-form path is exact up to erf; the quadrature path applies
    Gauss-Hermite to the same density.  The center value equals minus the
    heat-clock potential curvature there and exceeds scale^2/3 for
    scale >= 1.
    """
    s = float(scale)
    if not (s > 0 and math.isfinite(s)):
        raise SpecError("scale must be positive and finite")
    if path == PATH_CLOSED_FORM:
        return _block_ratio_closed(s)
    if path == PATH_QUADRATURE:
        return _block_ratio_quadrature(s, int(gh_order or BLOCK_RATIO_GH_ORDER))
    raise SpecError(f"unknown path {path!r}")


# ---------------------------------------------------------------------------
# chain verification


def _log_curvature_1d(blocks, t_bar: float, xs, order: int):
    """(log pbar)_xx(t_bar, x) for a sum-of-blocks potential, Gauss-Hermite
    with both x-derivatives moved onto the kernel.
    """
    nodes, weights = gauss_hermite_rule(order)
    z = np.asarray(nodes)
    s = math.sqrt(2.0 * t_bar)
    out = np.empty(len(xs))
    for i, x in enumerate(xs):
        h = np.exp(-_blocks_g_values(blocks, x - s * z))
        m0 = float(weights @ h)
        m1 = float(weights @ (z * h))
        m2 = float(weights @ ((4.0 * z * z - 2.0) * h))
        if not (math.isfinite(m0) and m0 > 0):
            raise QuadratureError("kernel mass vanished", x=float(x),
                                  t_bar=t_bar, order=order)
        out[i] = (m2 / m0 - 4.0 * (m1 / m0) ** 2) / (s * s)
    return out


class ChainBlockRow(NamedTuple):
    index: int
    scale: float
    center: float
    curvature: float
    isolated: float
    crosstalk: float
    bound: float
    passed: bool


@dataclass(frozen=True)
class ChainReport:
    """Per-block curvature of log pbar at the block centers, the k^2/3
    exceedance check, and the isolated-block cross-talk diagnostic.
    """

    t_bar: float
    rows: tuple
    report: BoundReport

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.rows) and self.report.ok


def verify_chain(chain: ChainSpec, t_bar: float = 0.5,
                 cfg: Optional[QuadratureConfig] = None,
                 gh_order: Optional[int] = None,
                 tolerance: float = 1e-7) -> ChainReport:
    """Check that (log pbar)_xx at each block center exceeds scale^2/3.

    The exceedance claim is stated at heat time 1/2; other ``t_bar`` values
    reuse the same reference bound for exploratory runs.  ``cfg`` supplies a
    Gauss-Hermite order override (``gh_order`` wins if both are given).
    """
    if not isinstance(chain, ChainSpec):
        raise SpecError("verify_chain needs a ChainSpec")
    if not (0 < t_bar <= 1):
        raise SpecError("t_bar must lie in (0, 1]")
    order = int(gh_order or (cfg.gh_order if cfg and cfg.gh_order else 0)
                or BLOCK_RATIO_GH_ORDER)
    rows = []
    bound_rows = []
    for k, blk in enumerate(chain.blocks, start=1):
        try:
            curv = float(_log_curvature_1d(chain.blocks, t_bar,
                                           [blk.center], order)[0])
            isolated = float(_log_curvature_1d((blk,), t_bar,
                                               [blk.center], order)[0])
        except QuadratureError as exc:
            raise QuadratureError(f"block {k} failed: {exc}", block=k,
                                  **exc.details) from exc
        bound = blk.scale ** 2 / 3.0
        margin = curv - bound
        passed = bool(margin >= -tolerance)
        rows.append(ChainBlockRow(index=k, scale=blk.scale, center=blk.center,
                                  curvature=curv, isolated=isolated,
                                  crosstalk=abs(curv - isolated), bound=bound,
                                  passed=passed))
        bound_rows.append(BoundRow(
            theorem_id="chain", quantity="log_pbar_xx", t_bar=float(t_bar),
            t_forward=-math.log(1.0 - t_bar) if t_bar < 1 else math.inf,
            x=(blk.center,), bound=bound, observed=curv, margin=margin,
            violated=not passed))
    report = BoundReport(theorem_id="chain",
                         target_name=f"counterexample_chain({len(rows)})",
                         tolerance=float(tolerance), rows=tuple(bound_rows),
                         flagged=())
    return ChainReport(t_bar=float(t_bar), rows=tuple(rows), report=report)
