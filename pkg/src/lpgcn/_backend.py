"""Kernel backend selection.

The compiled extension is used when it imports; ``LPGCN_BACKEND=python``
forces the pure-Python fallback.
"""

import os

from . import _pykernels

python = _pykernels
compiled = None
try:
    from . import _ckernels as compiled
except ImportError:  # extension not built
    compiled = None

if os.environ.get("LPGCN_BACKEND", "").lower() == "python" or compiled is None:
    active = _pykernels
else:
    active = compiled


def get(name=None):
    """Kernel module by name (``"cython"`` or ``"python"``); the active one by default."""
    if name is None:
        return active
    if name == "python":
        return _pykernels
    if name == "cython":
        if compiled is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return compiled
    raise ValueError(f"unknown backend {name!r}")


def available():
    return ["python"] + (["cython"] if compiled is not None else [])
