"""Batch entry point: bound sweeps, counter-example checks, manifold probes,
sampling runs, and convergence scans, driven by a JSON config plus flat
``--key value`` overrides (overrides win).

Exit codes: 0 all reports written and checks passed; 1 a verified quantity
violated its bound; 2 the config did not validate (partial outputs are
removed).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import bounds, counterexample, metrics, reports, sampler
from .errors import (ConfigError, HorizonExceededError, ScoreLabError,
                     SpecError, UnsupportedOperationError)
from .scorefield import QuadratureConfig, compact_qbar
from .targets import KIND_COMPACT, catalog

COMMANDS = ("verify-bounds", "counterexample", "manifold", "sample",
            "converge")

_DEFAULTS = {
    "verify-bounds": {"theorem_id": "thm31", "t_bars": None, "points": None,
                      "tolerance": bounds.DEFAULT_TOLERANCE,
                      "l1": None, "l2": None},
    "counterexample": {"scales": [1.0, 2.0, 4.0, 8.0], "K": None,
                       "margin": 10.0, "t_bar": 0.5, "gh_order": None,
                       "rel_tol": 1e-6},
    "manifold": {"points": [[1.5, 0.0], [3.0, 0.7]],
                 "t_ladder": [0.1, 0.05, 0.02, 0.01]},
    "sample": {"T": 3.0, "N": 20, "delta": 0.0, "ensemble": 1000,
               "source": {"kind": "exact"}},
    "converge": {"T": 3.0, "delta": 0.0, "ensemble": 100_000,
                 "N_list": [5, 10, 20, 40, 80],
                 "source": {"kind": "exact"}},
}


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _set_path(cfg: dict, dotted: str, value):
    node = cfg
    parts = dotted.split(".")
    for key in parts[:-1]:
        nxt = node.get(key)
        if not isinstance(nxt, dict):
            nxt = {}
            node[key] = nxt
        node = nxt
    node[parts[-1]] = value


def load_config(command: str, config_file, overrides) -> dict:
    cfg = {"target": {"name": "std_normal", "params": {}},
           "output": "score_lab_out", "format": "csv", "seed": 0,
           "threads": None}
    cfg.update({k: (json.loads(json.dumps(v)) if isinstance(v, (dict, list))
                    else v) for k, v in _DEFAULTS[command].items()})
    if config_file:
        try:
            loaded = json.loads(Path(config_file).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config_file}: {exc}")
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        for k, v in loaded.items():
            if isinstance(v, dict) and isinstance(cfg.get(k), dict):
                cfg[k].update(v)
            else:
                cfg[k] = v
    for key, raw in overrides:
        _set_path(cfg, key, _parse_value(raw))
    if cfg["format"] not in ("csv", "json"):
        raise ConfigError(f"unknown format {cfg['format']!r}")
    return cfg


def _resolve_threads(cfg) -> int:
    if cfg.get("threads") is not None:
        return max(1, int(cfg["threads"]))
    env = os.environ.get("SCORE_LAB_THREADS")
    return max(1, int(env)) if env else 1


def _target_of(cfg):
    tspec = cfg.get("target") or {}
    name = tspec.get("name")
    if not name:
        raise ConfigError("config needs target.name")
    try:
        return catalog(name, tspec.get("params") or {})
    except (SpecError, TypeError) as exc:
        raise ConfigError(f"target does not resolve: {exc}")


def _quad_cfg(cfg):
    q = cfg.get("quadrature")
    return QuadratureConfig(**q) if q else None


def _eta_of(spec):
    if spec is None:
        return None
    kind = spec.get("kind")
    if kind == "constant":
        return sampler.constant_shift(float(spec.get("c", 0.0)))
    raise ConfigError(f"unknown eta kind {kind!r}")


def _source_of(cfg, target, sampler_cfg=None):
    spec = cfg.get("source") or {"kind": "exact"}
    kind = spec.get("kind", "exact")
    try:
        return sampler.make_score_source(
            kind, target, cfg=sampler_cfg, eta=_eta_of(spec.get("eta")),
            base=spec.get("base", "exact"), quad_cfg=_quad_cfg(cfg))
    except (SpecError, UnsupportedOperationError) as exc:
        raise ConfigError(f"score source does not resolve: {exc}")


# ---------------------------------------------------------------------------
# command bodies: each returns (exit_code, files, meta_extra)


def _run_verify_bounds(cfg, outdir):
    target = _target_of(cfg)
    pts = cfg["points"]
    try:
        report = bounds.sweep_verify(
            target, cfg["theorem_id"],
            t_bars=cfg["t_bars"],
            points=np.asarray(pts, dtype=np.float64) if pts else None,
            cfg=_quad_cfg(cfg), tolerance=float(cfg["tolerance"]),
            l1=cfg["l1"], l2=cfg["l2"])
    except (SpecError, UnsupportedOperationError, HorizonExceededError) as exc:
        raise ConfigError(f"sweep does not validate: {exc}")
    dim = target.dim
    header = (["theorem_id", "quantity", "t_bar", "t_forward"]
              + [f"x{i}" for i in range(dim)]
              + ["bound", "observed", "margin", "violated"])
    rows = [[r.theorem_id, r.quantity, r.t_bar, r.t_forward, *r.x,
             r.bound, r.observed, r.margin, r.violated]
            for r in report.rows]
    path = reports.write_rows(outdir / "verify_bounds", header, rows,
                              cfg["format"])
    extra = {"theorem_id": report.theorem_id, "target": report.target_name,
             "violations": len(report.violations),
             "flagged": list(report.flagged),
             "worst_margin": report.worst_margin()}
    return (0 if report.ok else 1), [path], extra


def _run_counterexample(cfg, outdir):
    rel_tol = float(cfg["rel_tol"])
    rows, extra = [], {}
    if cfg.get("K"):
        chain, _ = counterexample.assemble_chain(int(cfg["K"]),
                                                 margin=float(cfg["margin"]))
        rep = counterexample.verify_chain(chain, t_bar=float(cfg["t_bar"]),
                                          gh_order=cfg["gh_order"])
        for r in rep.rows:
            rows.append([r.index, r.center, r.scale, r.curvature, r.bound,
                         r.passed])
        extra = {"t_bar": rep.t_bar,
                 "crosstalk": [r.crosstalk for r in rep.rows],
                 "isolated": [r.isolated for r in rep.rows]}
        ok = rep.ok
    else:
        scales = cfg["scales"]
        if not scales:
            raise ConfigError("counterexample needs scales or K")
        gaps = []
        ok = True
        for k, m in enumerate(scales, start=1):
            closed = counterexample.block_ratio(m, "closed_form")
            quad = counterexample.block_ratio(m, "quadrature",
                                              gh_order=cfg["gh_order"])
            gap = abs(quad.ratio - closed.ratio) / abs(closed.ratio)
            bound = float(m) ** 2 / 3.0
            passed = bool(closed.ratio > bound and gap <= rel_tol)
            ok = ok and passed
            gaps.append(gap)
            rows.append([k, 0.0, float(m), closed.ratio, bound, passed])
        extra = {"path_rel_gaps": gaps, "rel_tol": rel_tol}
    header = ["k", "x_k", "M", "ratio", "bound", "pass"]
    path = reports.write_rows(outdir / "counterexample", header, rows,
                              cfg["format"])
    return (0 if ok else 1), [path], extra


def _run_manifold(cfg, outdir):
    target = _target_of(cfg)
    if target.kind != KIND_COMPACT:
        raise ConfigError("manifold probes need a compact-support target")
    pts = np.atleast_2d(np.asarray(cfg["points"], dtype=np.float64))
    if pts.shape[1] != target.dim:
        raise ConfigError("points do not match the target dimension")
    ladder = [float(t) for t in cfg["t_ladder"]]
    if not ladder or min(ladder) <= 0:
        raise ConfigError("t_ladder must be positive")
    n = target.dim
    rows = []
    for t in ladder:
        fld = compact_qbar(target.compact, t, pts, cfg=_quad_cfg(cfg))
        for i in range(pts.shape[0]):
            hess = fld.hess_qbar[i]
            norm = float(np.linalg.norm(hess, 2))
            var_term = t * t * (n / t - float(np.trace(hess)))
            rows.append([t, *pts[i], t * norm, var_term])
    header = (["t"] + [f"x{i}" for i in range(n)]
              + ["t_hess_norm", "t2_variance_term"])
    path = reports.write_rows(outdir / "manifold", header, rows,
                              cfg["format"])
    return 0, [path], {"target": target.name}


def _sampler_config(cfg):
    try:
        return sampler.SamplerConfig(
            T=float(cfg["T"]), N=int(cfg["N"]), delta=float(cfg["delta"]),
            ensemble=int(cfg["ensemble"]), seed=int(cfg["seed"]),
            score_source=(cfg.get("source") or {}).get("kind", "exact"))
    except SpecError as exc:
        raise ConfigError(f"sampler config does not validate: {exc}")


def _run_sample(cfg, outdir):
    target = _target_of(cfg)
    run_cfg = _sampler_config(cfg)
    source = _source_of(cfg, target, run_cfg)
    run = sampler.backward_run(run_cfg, source,
                               threads=_resolve_threads(cfg))
    header = [f"x{i}" for i in range(target.dim)]
    path = reports.write_rows(outdir / "sample", header,
                              run.samples.tolist(), cfg["format"])
    extra = {"excluded": run.excluded, "provenance": run.provenance,
             "kept": int(run.samples.shape[0])}
    return 0, [path], extra


def _run_converge(cfg, outdir):
    target = _target_of(cfg)
    if target.dim > 2:
        raise ConfigError("convergence scans support dimensions 1 and 2")
    n_list = [int(n) for n in cfg["N_list"]]
    if not n_list:
        raise ConfigError("converge needs a nonempty N_list")
    threads = _resolve_threads(cfg)
    ensemble = int(cfg["ensemble"])
    delta = float(cfg["delta"])
    ref = sampler.forward_sample(target, delta, ensemble,
                                 seed=int(cfg["seed"]) + (1 << 30))
    rows = []
    for N in n_list:
        run_cfg = sampler.SamplerConfig(
            T=float(cfg["T"]), N=N, delta=delta, ensemble=ensemble,
            seed=int(cfg["seed"]),
            score_source=(cfg.get("source") or {}).get("kind", "exact"))
        source = _source_of(cfg, target, run_cfg)
        run = sampler.backward_run(run_cfg, source, threads=threads)
        err, se = ensemble_distance(run.samples, ref)
        rows.append([N, err, se, run.excluded])
    header = ["N", "error", "stderr", "excluded"]
    path = reports.write_rows(outdir / "converge", header, rows,
                              cfg["format"])
    extra = {}
    if len(rows) >= 4:
        fit = metrics.rate_fit([(r[0], r[1]) for r in rows])
        extra["rate_fit"] = {"floor": fit.floor, "coeff": fit.coeff,
                             "gamma": fit.gamma, "residual": fit.residual,
                             "flagged": fit.flagged}
    return 0, [path], extra


def ensemble_distance(a: np.ndarray, b: np.ndarray):
    """W1 between two ensembles with a half-split standard-error estimate."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    dist = metrics.w1_1d if a.shape[1] == 1 else metrics.w1_sliced
    err = dist(a, b)
    e1 = dist(a[0::2], b[0::2])
    e2 = dist(a[1::2], b[1::2])
    return float(err), float(abs(e1 - e2) / 2.0)


_RUNNERS = {"verify-bounds": _run_verify_bounds,
            "counterexample": _run_counterexample,
            "manifold": _run_manifold,
            "sample": _run_sample,
            "converge": _run_converge}


def run(command: str, cfg: dict) -> int:
    outdir = Path(cfg["output"])
    written = []
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        code, files, extra = _RUNNERS[command](cfg, outdir)
        written.extend(files)
        meta = reports.write_meta(
            outdir / f"{command.replace('-', '_')}.meta.json",
            command, cfg, reports=[str(p) for p in files], **extra)
        written.append(meta)
    except ConfigError as exc:
        for p in written:
            Path(p).unlink(missing_ok=True)
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot write reports: {exc}", file=sys.stderr)
        return 2
    return code


def _split_overrides(tokens):
    out = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--") or i + 1 >= len(tokens):
            raise ConfigError(f"overrides come in --key value pairs, got {tok!r}")
        out.append((tok[2:], tokens[i + 1]))
        i += 2
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="score-lab",
        description="bound sweeps, counter-example checks, manifold probes, "
                    "sampling and convergence scans")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", default=None, help="JSON config file")
    args, rest = parser.parse_known_args(argv)
    try:
        overrides = _split_overrides(rest)
        cfg = load_config(args.command, args.config, overrides)
    except (ConfigError, ScoreLabError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return run(args.command, cfg)


if __name__ == "__main__":
    sys.exit(main())
