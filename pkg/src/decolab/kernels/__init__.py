"""Classical trajectory kernels.

The compiled extension is used when it was built; otherwise, or when
DECOLAB_PURE_PYTHON=1, the numpy implementation is used.  ``BACKEND`` names
the active one and :func:`get_backend` returns either explicitly.
"""
from __future__ import annotations

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def get_backend(name: str = "auto"):
    if name == "python":
        return _pykernels
    if name == "compiled":
        if _ckernels is None:
            raise ImportError("compiled kernels are not available; build with Cython")
        return _ckernels
    if name != "auto":
        raise ValueError("backend must be 'auto', 'python' or 'compiled'")
    if _ckernels is None or os.environ.get("DECOLAB_PURE_PYTHON", "") not in ("", "0"):
        return _pykernels
    return _ckernels


_active = get_backend()
BACKEND = "compiled" if _active is _ckernels and _ckernels is not None else "python"
COMPILED_AVAILABLE = _ckernels is not None

langevin_steps = _active.langevin_steps
tangent_log_growth = _active.tangent_log_growth
