"""Deterministic report files.

CSV and JSON bodies must be byte-identical across reruns of the same
config, so floats are printed at 17 significant digits (exact round trip)
and anything time-dependent lives in a sidecar metadata file.
"""

from __future__ import annotations

import csv
import json
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from ._kernels import BACKEND


def fmt_value(v) -> str:
    if isinstance(v, bool) or isinstance(v, np.bool_):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.16e" % float(v)
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt_value(v) for v in row])
    return path


def _jsonable(v):
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return v


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True)
                    + "\n")
    return path


def write_rows(path_base, header, rows, fmt: str) -> Path:
    """One report in the requested format; the body depends only on the data."""
    if fmt == "csv":
        return write_csv(Path(str(path_base) + ".csv"), header, rows)
    payload = [dict(zip(header, (_jsonable(v) for v in row))) for row in rows]
    return write_json(Path(str(path_base) + ".json"), payload)


def write_meta(path, command: str, config: dict, **extra) -> Path:
    """Sidecar metadata: the only place a timestamp is allowed."""
    meta = {
        "command": command,
        "config": _jsonable(config),
        "written_at": datetime.now(timezone.utc).isoformat(),
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "scorelab": __version__,
            "kernel_backend": BACKEND,
        },
        "argv": sys.argv[1:],
    }
    meta.update({k: _jsonable(v) for k, v in extra.items()})
    return write_json(path, meta)
