"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the pure-Python
fallback is imported. Set ``NTTCOMPRESS_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
metropolis_run = _kernels_py.metropolis_run

if not os.environ.get("NTTCOMPRESS_PURE_PYTHON"):
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        _kernels = None
    else:
        BACKEND = "cython"
        metropolis_run = _kernels.metropolis_run


def get_backend(name=None):
    """Return the kernel namespace for ``name`` ("cython", "python" or the default)."""
    if name is None:
        name = BACKEND
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels  # noqa: F811

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")
