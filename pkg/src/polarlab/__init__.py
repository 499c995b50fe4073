"""Amplitude/phase (R, S) laboratory for four quantum wave equations."""
from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
