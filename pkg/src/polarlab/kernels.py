"""Backend selection for the time-stepping kernels.

The compiled Cython module is used when it was built; otherwise (or when
``POLARLAB_PURE_PYTHON=1`` is set) the numpy implementation is used.
"""
import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels

if _ckernels is not None and os.environ.get("POLARLAB_PURE_PYTHON") != "1":
    BACKEND = "cython"
else:
    BACKEND = "python"

_active = BACKENDS[BACKEND]
cn_evolve = _active.cn_evolve
wave_evolve = _active.wave_evolve
dirac_evolve = _active.dirac_evolve


def get_backend(name=None):
    """Return the kernel module called ``name`` (default: the active one)."""
    if name is None:
        return _active
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available; have {sorted(BACKENDS)}") from None
