"""Picks the compiled kernels when available, the numpy ones otherwise.

Set ``NURGG_PURE_PYTHON=1`` before import to force the numpy backend.
"""
import os

from . import _pure

if os.environ.get("NURGG_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _pure
    BACKEND = "python"
else:
    try:
        from . import _core as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pure
        BACKEND = "python"

radial_ball_mass = _impl.radial_ball_mass
grid_out_edges = _impl.grid_out_edges
count_components = _impl.count_components

# kept available for cross-checks and the benchmark
pure = _pure


def compiled():
    """The compiled module, or None if it was not built."""
    try:
        from . import _core
    except ImportError:
        return None
    return _core
