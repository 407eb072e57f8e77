"""Backend selection for the hot loops.

The compiled ``_kernels`` extension is used when it imports; otherwise the
pure-Python ``_fallback`` module is.  Setting ``PROPGRAPH_PURE_PYTHON=1``
forces the fallback.  Both backends return identical results.
"""

import os

from . import _fallback

if os.environ.get("PROPGRAPH_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _fallback

BACKEND = "python" if _impl is _fallback else "cython"


def get_backend(name: str):
    """Return the kernel module for ``"python"`` or ``"cython"``."""
    if name == "python":
        return _fallback
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")


cheeger_search = _impl.cheeger_search
round_trip_walks = _impl.round_trip_walks
checked_matmul = _impl.checked_matmul
