"""Forward noising samples and the backward exponential-integrator scheme.

All randomness is counter-based: every normal or uniform draw is a pure hash
of (seed, stream, trajectory index, slot), so trajectories are reproducible
bit for bit regardless of batching, thread count, or how many other
trajectories run.  Stream ids: 1 seeds the backward initial ensemble, 16+k
the noise of backward step k; forward sampling owns the 2^20 range and the
rejection sampler the 2^21 range.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .errors import (QuadratureError, RejectionError, SpecError,
                     UnsupportedOperationError)
from .scorefield import QuadratureConfig, closed_form_mixture, score_field
from .targets import (KIND_COMPACT, KIND_MIXTURE, KIND_SMOOTH,
                      FORM_POINTS, FORM_RECTS, FORM_SEGMENTS, TargetSpec,
                      as_smooth)

STREAM_BACKWARD_INIT = 1
STREAM_BACKWARD_STEP = 16          # step k draws from stream 16 + k
STREAM_FORWARD_NOISE = 1 << 20     # the OU mixing normal
STREAM_FORWARD_PICK = (1 << 20) + 1
STREAM_FORWARD_AXIS0 = (1 << 20) + 2
STREAM_FORWARD_AXIS1 = (1 << 20) + 3
STREAM_FORWARD_COMP = (1 << 20) + 4
STREAM_REJECTION = 1 << 21         # batch b: 2b proposals, 2b+1 acceptances

_CHUNK_ROWS = 1 << 17
_MIN_ACCEPT_RATE = 1e-4

SOURCE_EXACT = "exact"
SOURCE_QUADRATURE = "quadrature"
SOURCE_PERTURBED = "perturbed"


@dataclass(frozen=True)
class SamplerConfig:
    """Backward-run parameters.

    The discretization is uniform: the scheme time runs 0 to T - delta in N
    steps, and step k evaluates the score at forward time T - k(T-delta)/N,
    so with delta > 0 no evaluation ever happens below forward time delta.
    """

    T: float
    N: int
    delta: float = 0.0
    ensemble: int = 1
    seed: int = 0
    score_source: str = SOURCE_EXACT

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise SpecError("T must be positive and finite")
        if self.N < 1:
            raise SpecError("N must be >= 1")
        if not (0 <= self.delta < self.T):
            raise SpecError("delta must lie in [0, T)")
        if self.ensemble < 1:
            raise SpecError("ensemble must be >= 1")
        if self.score_source not in (SOURCE_EXACT, SOURCE_QUADRATURE,
                                     SOURCE_PERTURBED):
            raise SpecError(f"unknown score source {self.score_source!r}")

    @property
    def dt(self) -> float:
        return (self.T - self.delta) / self.N

    @property
    def eval_times(self):
        """Forward times of the N score evaluations, in scheme order."""
        return tuple(self.T - k * self.dt for k in range(self.N))

    @property
    def schedule(self):
        """Increasing forward-time grid delta + k dt, k = 1..N."""
        return tuple(self.delta + (k + 1) * self.dt for k in range(self.N))


@dataclass(frozen=True)
class ScoreSource:
    """Vectorized score evaluator (t, points (m,n)) -> (m,n) with provenance."""

    evaluator: Callable
    provenance: str
    dim: int

    def __call__(self, t: float, pts) -> np.ndarray:
        return self.evaluator(t, pts)


@dataclass(frozen=True)
class BackwardRun:
    """Terminal ensemble at forward time delta; non-finite trajectories are
    dropped and counted, never silently kept.
    """

    samples: np.ndarray
    excluded: int
    cfg: SamplerConfig
    provenance: str


# ---------------------------------------------------------------------------
# forward sampling


def _pick_index(seed, stream, count, probabilities):
    cum = np.cumsum(np.asarray(probabilities, dtype=np.float64))
    cum[-1] = 1.0
    u = _kernels.uniform_draws(seed, stream, 0, count)
    return np.searchsorted(cum, u, side="right").clip(0, len(cum) - 1)


def _initial_mixture(mix, count, seed):
    comp = _pick_index(seed, STREAM_FORWARD_PICK, count, mix.weights)
    z = _kernels.normal_draws(seed, STREAM_FORWARD_COMP, 0, count, mix.dim)
    return mix.means[comp] + np.sqrt(mix.variances[comp])[:, None] * z


def _initial_compact(compact, count, seed):
    if compact.form == FORM_POINTS:
        idx = _pick_index(seed, STREAM_FORWARD_PICK, count, compact.weights)
        return compact.points[idx].copy()
    if compact.form == FORM_SEGMENTS:
        iv = compact.intervals
        lengths = iv[:, 1] - iv[:, 0]
        idx = _pick_index(seed, STREAM_FORWARD_PICK, count,
                          lengths / lengths.sum())
        u = _kernels.uniform_draws(seed, STREAM_FORWARD_AXIS0, 0, count)
        return (iv[idx, 0] + u * lengths[idx])[:, None]
    rects = compact.rects
    areas = (rects[:, 1] - rects[:, 0]) * (rects[:, 3] - rects[:, 2])
    idx = _pick_index(seed, STREAM_FORWARD_PICK, count, areas / areas.sum())
    ux = _kernels.uniform_draws(seed, STREAM_FORWARD_AXIS0, 0, count)
    uy = _kernels.uniform_draws(seed, STREAM_FORWARD_AXIS1, 0, count)
    x = rects[idx, 0] + ux * (rects[idx, 1] - rects[idx, 0])
    y = rects[idx, 2] + uy * (rects[idx, 3] - rects[idx, 2])
    return np.column_stack([x, y])


def _initial_smooth(target, count, seed):
    spec = as_smooth(target)
    n = spec.dim
    a1, a2 = spec.alpha1, spec.alpha2
    scale = 1.0 / math.sqrt(1.0 - a2)
    g0 = float(spec.g(np.zeros((1, n)))[0][0])
    pool = []
    accepted = 0
    proposed = 0
    batch = 0
    while accepted < count:
        z = _kernels.normal_draws(seed, STREAM_REJECTION + 2 * batch, 0,
                                  count, n)
        pts = scale * z
        gv = np.asarray(spec.g(pts)[0], dtype=np.float64)
        log_accept = g0 - a1 - gv - 0.5 * a2 * (pts * pts).sum(axis=1)
        u = _kernels.uniform_draws(seed, STREAM_REJECTION + 2 * batch + 1,
                                   0, count)
        keep = np.log(np.maximum(u, 2.0 ** -53)) <= log_accept
        pool.append(pts[keep])
        accepted += int(keep.sum())
        proposed += count
        batch += 1
        if proposed >= max(100_000, 20 * count) and accepted < proposed * _MIN_ACCEPT_RATE:
            raise RejectionError(
                f"rejection acceptance rate {accepted / proposed:.2e} "
                f"below {_MIN_ACCEPT_RATE:.0e} after {proposed} proposals")
    return np.concatenate(pool, axis=0)[:count]


def forward_sample(target: TargetSpec, t: float, count: int,
                   seed: int) -> np.ndarray:
    """Samples of the noised law at forward time t, deterministic in seed.

    The initial law is sampled by kind (mixture directly, compact by
    atom/length/area, smooth potential by envelope rejection), then mixed
    with an independent normal through the exact one-step noising map.
    """
    if t < 0:
        raise SpecError("forward time must be nonnegative")
    if count < 1:
        raise SpecError("count must be >= 1")
    if not isinstance(target, TargetSpec):
        raise SpecError("forward_sample needs a TargetSpec")
    if target.kind == KIND_MIXTURE:
        x0 = _initial_mixture(target.mixture, count, seed)
    elif target.kind == KIND_COMPACT:
        x0 = _initial_compact(target.compact, count, seed)
    elif target.kind == KIND_SMOOTH:
        x0 = _initial_smooth(target, count, seed)
    else:
        raise UnsupportedOperationError(f"cannot sample kind {target.kind!r}")
    if t == 0:
        return x0
    z = _kernels.normal_draws(seed, STREAM_FORWARD_NOISE, 0, count,
                              target.dim)
    return math.exp(-0.5 * t) * x0 + math.sqrt(-math.expm1(-t)) * z


# ---------------------------------------------------------------------------
# score sources


def _mixture_of(target):
    if isinstance(target, TargetSpec):
        if target.mixture is not None:
            return target.mixture
        if target.mixture_equivalent is not None:
            return target.mixture_equivalent
    raise UnsupportedOperationError(
        "exact scores need a Gaussian-mixture law")


def make_score_source(kind: str, target: TargetSpec,
                      cfg: Optional[SamplerConfig] = None,
                      eta: Optional[Callable] = None,
                      base: str = SOURCE_EXACT,
                      quad_cfg: Optional[QuadratureConfig] = None) -> ScoreSource:
    """Build a score evaluator: exact (mixture closed form), quadrature
    (field engine in the forward clock), or perturbed (base plus a
    deterministic shift field eta(t, x)).
    """
    if kind == SOURCE_EXACT:
        mix = _mixture_of(target)

        def exact_eval(t, pts, _mix=mix):
            return closed_form_mixture(_mix, t, np.atleast_2d(pts))[0]

        return ScoreSource(evaluator=exact_eval,
                           provenance=f"exact:{target.name}", dim=target.dim)
    if kind == SOURCE_QUADRATURE:
        if target.kind == KIND_COMPACT and (cfg is None or cfg.delta <= 0):
            raise UnsupportedOperationError(
                "compact-support scores blow up at forward time zero; "
                "quadrature sources need early stopping delta > 0")
        method = "moments" if target.kind == KIND_COMPACT else "quadrature"

        def quad_eval(t, pts, _m=method, _q=quad_cfg):
            return score_field(target, t, np.atleast_2d(pts), method=_m,
                               cfg=_q)[0]

        return ScoreSource(evaluator=quad_eval,
                           provenance=f"quadrature:{target.name}",
                           dim=target.dim)
    if kind == SOURCE_PERTURBED:
        if eta is None:
            raise SpecError("perturbed sources need an eta(t, x) field")
        base_src = make_score_source(base, target, cfg=cfg, quad_cfg=quad_cfg)

        def shifted_eval(t, pts, _b=base_src.evaluator, _e=eta):
            pts = np.atleast_2d(pts)
            return _b(t, pts) + np.broadcast_to(
                np.asarray(_e(t, pts), dtype=np.float64), pts.shape)

        return ScoreSource(evaluator=shifted_eval,
                           provenance=f"perturbed({base_src.provenance})",
                           dim=target.dim)
    raise SpecError(f"unknown score source kind {kind!r}")


def constant_shift(c: float) -> Callable:
    """eta field adding the constant c to every score component."""

    def eta(t, pts):
        return np.full(np.atleast_2d(pts).shape, float(c))

    return eta


# ---------------------------------------------------------------------------
# backward scheme


def exp_step(x, dt: float, score, noise):
    """One exponential-integrator update:
    e^{dt/2} x + 2(e^{dt/2} - 1) score + sqrt(e^{dt} - 1) noise.
    """
    if dt <= 0:
        raise SpecError("dt must be positive")
    half = math.exp(0.5 * dt)
    return (half * np.asarray(x, dtype=np.float64)
            + 2.0 * (half - 1.0) * np.asarray(score, dtype=np.float64)
            + math.sqrt(math.expm1(dt)) * np.asarray(noise, dtype=np.float64))


def _run_chunk(cfg, source, start, count):
    n = source.dim
    x = _kernels.normal_draws(cfg.seed, STREAM_BACKWARD_INIT, start, count, n)
    alive = np.ones(count, dtype=bool)
    dt = cfg.dt
    for k in range(cfg.N):
        live = np.flatnonzero(alive)
        if live.size == 0:
            break
        noise = _kernels.normal_draws(cfg.seed, STREAM_BACKWARD_STEP + k,
                                      start, count, n)
        t_fwd = cfg.T - k * dt
        try:
            scores = np.asarray(source.evaluator(t_fwd, x[live]),
                                dtype=np.float64)
        except QuadratureError:
            # localize the failing rows; keep the rest of the chunk alive
            scores = np.full((live.size, n), np.nan)
            for j, row in enumerate(x[live]):
                try:
                    scores[j] = source.evaluator(t_fwd, row[None, :])[0]
                except QuadratureError:
                    pass
        stepped = exp_step(x[live], dt, scores, noise[live])
        ok = np.isfinite(stepped).all(axis=1)
        x[live] = np.where(ok[:, None], stepped, np.nan)
        alive[live[~ok]] = False
    return x, alive


def backward_run(cfg: SamplerConfig, source: ScoreSource,
                 threads: Optional[int] = None) -> BackwardRun:
    """Run the backward scheme from N(0, I) to forward time delta.

    Trajectories are independent; they are processed in fixed index chunks,
    optionally across threads, with identical output either way.
    """
    if not isinstance(source, ScoreSource):
        raise SpecError("backward_run needs a ScoreSource")
    m, n = cfg.ensemble, source.dim
    workers = max(1, int(threads or 1))
    chunk = min(_CHUNK_ROWS, -(-m // workers))
    spans = [(s, min(chunk, m - s)) for s in range(0, m, chunk)]
    samples = np.empty((m, n))
    alive = np.empty(m, dtype=bool)

    def fill(span):
        s, c = span
        xs, al = _run_chunk(cfg, source, s, c)
        samples[s:s + c] = xs
        alive[s:s + c] = al

    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, spans))
    else:
        for span in spans:
            fill(span)
    return BackwardRun(samples=samples[alive],
                       excluded=int(m - alive.sum()), cfg=cfg,
                       provenance=source.provenance)
