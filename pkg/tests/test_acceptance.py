"""Whole-laboratory acceptance run: ten numbered criteria, one test each.

Every test prints a single `criterion NN <label>: PASS/FAIL (detail)` line
on the live terminal before asserting, so a plain pytest run shows the full
scoreboard.  Tolerances are stated inline next to each check.
"""

import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from scorelab import bounds, counterexample, metrics, sampler
from scorelab.scorefield import compact_qbar, qbar_field
from scorelab.targets import catalog

REPO_ROOT = Path(__file__).resolve().parents[1]
LADDER = (0.1, 0.05, 0.02, 0.01)

# prior_horizon(M0 + 1) and the blow-up horizon -log(1 - 1/M0), both frozen
# from 40-digit evaluations of 2*asinh(1/(4L)) and log(M0/(M0-1))
PRIOR_VS_HORIZON = (
    (1.5, 0.1996681577984151266546, 1.098612288668109691395),
    (2.0, 0.1664743657683729192391, 0.6931471805599453094172),
    (4.0, 0.09995838013869733046279, 0.2876820724517809274392),
)


def _verdict(capsys, num, label, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {num:02d} {label}: "
              f"{'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {num:02d} {label}: {detail}"


def test_criterion_01_block_curvature_paths(capsys):
    worst_gap, min_excess = 0.0, math.inf
    for m in (1.0, 2.0, 4.0, 8.0):
        closed = counterexample.block_ratio(m, "closed_form")
        quad = counterexample.block_ratio(m, "quadrature")
        worst_gap = max(worst_gap,
                        abs(quad.ratio - closed.ratio) / closed.ratio)
        min_excess = min(min_excess, closed.ratio - m * m / 3.0)
    ok = worst_gap <= 1e-6 and min_excess > 0.0
    _verdict(capsys, 1, "block curvature two paths", ok,
             f"worst path gap {worst_gap:.2e} <= 1e-06, "
             f"min margin over M^2/3 = {min_excess:.3g} > 0")


def test_criterion_02_chain_horizon_sharpness(capsys):
    _, chain_target = counterexample.assemble_chain(3)
    pts = np.linspace(-4.0, 40.0, 45).reshape(-1, 1)
    report = bounds.sweep_verify(chain_target, "thm31",
                                 t_bars=(0.05, 0.15, 0.25, 0.35, 0.45),
                                 points=pts)
    lower_bad = sum(1 for r in report.rows
                    if r.quantity == "hess_q_min_eig" and r.violated)
    fld = qbar_field(counterexample.block_target(8.0), 0.5,
                     np.array([[0.0]]))
    q_xx = float(fld.hess_qbar[0, 0, 0])
    ok = report.ok and lower_bad == 0 and q_xx <= -64.0 / 3.0
    _verdict(capsys, 2, "chain horizon sharpness", ok,
             f"{lower_bad} lower violations before the horizon, "
             f"q_xx at the widest block = {q_xx:.2f} <= {-64.0 / 3.0:.2f}")


def test_criterion_03_prior_horizon_comparison(capsys):
    worst_dev, min_gap = 0.0, math.inf
    for m0, ph_ref, horizon_ref in PRIOR_VS_HORIZON:
        ph = bounds.prior_horizon(m0 + 1.0)
        horizon = bounds.thm31_bounds(m0, 1.0, 0.0)[2]
        worst_dev = max(worst_dev, abs(ph - ph_ref),
                        abs(horizon - horizon_ref))
        min_gap = min(min_gap, horizon - ph)
    ok = worst_dev <= 1e-10 and min_gap > 0.0
    _verdict(capsys, 3, "prior horizon comparison", ok,
             f"worst deviation from reference {worst_dev:.2e} <= 1e-10, "
             f"min horizon gap {min_gap:.4f} > 0")


def test_criterion_04_oracle_equivalence(capsys):
    pts = bounds.default_sweep_grid(1)
    worst = 0.0
    for name, params in (("std_normal", {}), ("gaussian", {"sigma2": 4.0}),
                         ("mixture2", {})):
        tgt = catalog(name, params)
        for tb in bounds.DEFAULT_T_BARS:
            fq = qbar_field(tgt, tb, pts, method="quadrature")
            fc = qbar_field(tgt, tb, pts, method="closed_form")
            for a, b in ((fq.grad_qbar, fc.grad_qbar),
                         (fq.hess_qbar, fc.hess_qbar)):
                scale = max(float(np.abs(b).max()), 1.0)
                worst = max(worst, float(np.abs(a - b).max()) / scale)
    ok = worst <= 1e-8
    _verdict(capsys, 4, "oracle equivalence", ok,
             f"worst quadrature-vs-closed-form gap {worst:.2e} <= 1e-08")


def test_criterion_05_two_point_bounds(capsys):
    tgt = catalog("two_point")
    xs = np.linspace(-3.0, 3.0, 31).reshape(-1, 1)
    report = bounds.sweep_verify(tgt, "thm37", t_bars=(0.05, 0.1, 0.5),
                                 points=xs)
    worst = 0.0
    for tb in (0.05, 0.1, 0.5):
        fld = compact_qbar(tgt.compact, tb, xs)
        closed = 1.0 / tb - np.cosh(xs[:, 0] / tb) ** -2 / tb ** 2
        gap = np.abs(fld.hess_qbar[:, 0, 0] - closed)
        worst = max(worst, float((gap / np.maximum(np.abs(closed),
                                                   1.0)).max()))
    ok = report.ok and worst <= 1e-8
    _verdict(capsys, 5, "compact two-point bounds", ok,
             f"{len(report.violations)} violations, "
             f"sech^2 closed form gap {worst:.2e} <= 1e-08")


def test_criterion_06_notch_variance_blowup(capsys):
    tgt = catalog("notched_square")
    n = tgt.dim
    pt = np.array([[1.5, 0.0]])
    vals = []
    for t in LADDER:
        fld = compact_qbar(tgt.compact, t, pt)
        vals.append(t * t * (n / t - float(np.trace(fld.hess_qbar[0]))))
    monotone = all(a > b for a, b in zip(vals, vals[1:]))
    ok = 0.85 <= vals[-1] <= 1.1 and monotone
    _verdict(capsys, 6, "notch variance blow-up", ok,
             f"t^2 variance term at t=0.01 is {vals[-1]:.4f} in [0.85, 1.1], "
             f"monotone over the ladder: {monotone}")


def test_criterion_07_generic_point_bounded(capsys):
    tgt = catalog("notched_square")
    pt = np.array([[3.0, 0.7]])
    scaled = []
    for t in LADDER:
        fld = compact_qbar(tgt.compact, t, pt)
        scaled.append(t * float(np.linalg.norm(fld.hess_qbar[0], 2)))
    spread = max(scaled) / min(scaled)
    ok = spread < 2.0
    _verdict(capsys, 7, "generic point stays O(1/t)", ok,
             f"t*|hess| spread over the ladder {spread:.3f} < 2")


def test_criterion_08_convergence_rate(capsys):
    tgt = catalog("mixture2")
    ensemble, seed = 1_000_000, 0
    ref = sampler.forward_sample(tgt, 0.0, ensemble, seed + (1 << 30))
    src = sampler.make_score_source("exact", tgt)
    rows = []
    for N in (5, 10, 20, 40, 80):
        cfg = sampler.SamplerConfig(T=3.0, N=N, delta=0.0,
                                    ensemble=ensemble, seed=seed)
        run = sampler.backward_run(cfg, src)
        err = metrics.w1_1d(run.samples, ref)
        half_gap = abs(metrics.w1_1d(run.samples[0::2], ref[0::2])
                       - metrics.w1_1d(run.samples[1::2], ref[1::2]))
        rows.append((N, err, half_gap / 2.0))
    decreasing = all(
        rows[i + 1][1] <= rows[i][1]
        + 2.0 * math.hypot(rows[i][2], rows[i + 1][2])
        for i in range(len(rows) - 1))
    fit = metrics.rate_fit([(N, err) for N, err, _ in rows])
    ok = decreasing and 0.7 <= fit.gamma <= 1.3 and not fit.flagged
    _verdict(capsys, 8, "sampler convergence rate", ok,
             f"W1 {rows[0][1]:.4f} -> {rows[-1][1]:.4f} non-increasing to "
             f"2 se: {decreasing}, fitted order {fit.gamma:.3f} in "
             f"[0.7, 1.3]")


def test_criterion_09_score_error_term(capsys):
    tgt = catalog("mixture2")
    cfg = sampler.SamplerConfig(T=3.0, N=40, delta=0.0, ensemble=200_000,
                                seed=0)
    schedule = sorted(cfg.eval_times)
    ref = sampler.forward_sample(tgt, 0.0, cfg.ensemble, 1 << 30)
    eps_ok = True
    errs = []
    for c in (0.05, 0.1, 0.2):
        src = sampler.make_score_source("perturbed", tgt, cfg=cfg,
                                        eta=sampler.constant_shift(c))
        est, se = metrics.eps0(src, tgt, schedule, mc=4000, seed=3)
        eps_ok = eps_ok and abs(est - c) <= max(3.0 * se, 1e-12)
        run = sampler.backward_run(cfg, src)
        errs.append(metrics.w1_1d(run.samples, ref))
    ratios = [errs[1] / errs[0], errs[2] / errs[1]]
    linear = all(2.0 / 1.5 <= r <= 2.0 * 1.5 for r in ratios)
    ok = eps_ok and linear
    _verdict(capsys, 9, "score error term", ok,
             f"eps0 matches the shift to 3 se: {eps_ok}, terminal W1 "
             f"doubling ratios {ratios[0]:.2f}, {ratios[1]:.2f} within "
             f"1.5x of linear")


def test_criterion_10_module_invariants(capsys):
    start = time.monotonic()
    env = dict(os.environ, SCORE_LAB_THREADS="1")
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
         "--ignore=tests/test_acceptance.py", "tests"],
        cwd=REPO_ROOT, env=env, capture_output=True, text=True)
    wall = time.monotonic() - start
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() \
        else proc.stderr.strip()[-120:]
    ok = proc.returncode == 0 and wall < 600.0
    _verdict(capsys, 10, "module invariant suite", ok,
             f"{tail}, wall {wall:.0f}s < 600s single-threaded")
