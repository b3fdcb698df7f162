"""Hot-kernel backend selection.

The compiled Cython extension is preferred when importable; the pure-numpy
module implements the same contract.  Uniform streams match bit for bit
across backends; normal streams share the uniforms but go through different
libm builds, so they agree only to a couple of ulps.  Any one backend is
bitwise reproducible.  Force a choice with ``SCORE_LAB_BACKEND=compiled|pure``
(``compiled`` raises if the extension is missing rather than silently
downgrading).
"""

import os

from . import pure

_requested = os.environ.get("SCORE_LAB_BACKEND", "auto").lower()

if _requested not in ("auto", "compiled", "pure"):
    raise ImportError(f"SCORE_LAB_BACKEND must be auto|compiled|pure, got {_requested!r}")

_impl = None
if _requested in ("auto", "compiled"):
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _requested == "compiled":
            raise
        _impl = None
if _impl is None:
    _impl = pure

BACKEND = _impl.BACKEND_NAME
uniform_draws = _impl.uniform_draws
normal_draws = _impl.normal_draws
weighted_gaussian_moments = _impl.weighted_gaussian_moments
counter_hash = pure.counter_hash
mix64 = pure.mix64


def available_backends():
    """Names of importable backends, compiled first when present."""
    names = []
    try:
        from . import _core  # noqa: F401

        names.append("compiled")
    except ImportError:
        pass
    names.append("pure")
    return tuple(names)


def get_backend(name):
    """Return the backend module for an explicit name ('compiled' or 'pure')."""
    if name == "pure":
        return pure
    if name == "compiled":
        from . import _core

        return _core
    raise ValueError(f"unknown backend {name!r}")
