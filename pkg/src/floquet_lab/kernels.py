"""Kernel selection: compiled extension when importable, numpy otherwise.

Set ``FLOQUET_LAB_PURE=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
assemble_galerkin = _kernels_py.assemble_galerkin

if os.environ.get("FLOQUET_LAB_PURE") != "1":
    try:
        from ._kernels import assemble_galerkin  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass

__all__ = ["BACKEND", "assemble_galerkin"]
