"""Backend selection for the simulation kernels.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``OPTDIV_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the numpy implementation is used.  Both expose
``simulate_batch``, ``normals``, ``uniforms`` and ``philox4x32``.
"""
from __future__ import annotations

import os

from . import _kernels_py

_force_py = os.environ.get("OPTDIV_PURE_PYTHON", "") not in ("", "0")

if _force_py:
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
        BACKEND = "python"

simulate_batch = _impl.simulate_batch
normals = _impl.normals
uniforms = _impl.uniforms
philox4x32 = _impl.philox4x32
SCHEMES = tuple(_kernels_py.SCHEMES)
