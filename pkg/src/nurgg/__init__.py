"""Nonuniform random geometric graphs with location-dependent cut-off radii."""
from ._kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
