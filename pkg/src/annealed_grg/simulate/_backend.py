"""Pick the sweep kernel at import: compiled if available, else pure Python.

Set ``ANNEALED_GRG_BACKEND=python`` to force the fallback.
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

if os.environ.get("ANNEALED_GRG_BACKEND", "").lower() == "python" or _ckernels is None:
    DEFAULT = "python"
else:
    DEFAULT = "cython"


def get(name=None):
    name = name or DEFAULT
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} is not available; have {sorted(BACKENDS)}") from None
