"""Backend selection for the controller integration kernel.

The compiled extension is used when it imports; set ``GEKF_ESC_PURE=1`` to
force the pure-Python fallback. Custom (callable) fields always go through the
fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

_compiled = None
if os.environ.get("GEKF_ESC_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled  # type: ignore[no-redef]
    except ImportError:  # extension not built
        _compiled = None

BACKEND = _compiled.BACKEND if _compiled is not None else _kernels_py.BACKEND


def compiled_available() -> bool:
    return _compiled is not None


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` ("cython", "python" or None for the default)."""
    if name is None:
        return _compiled if _compiled is not None else _kernels_py
    if name == "python":
        return _kernels_py
    if name == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernel is not available; build the extension first")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def advance(*args, backend: str | None = None, field_kind: int = 0, **kwargs):
    mod = get_backend(backend)
    if field_kind < 0:
        mod = _kernels_py
    return mod.advance(*args, field_kind=field_kind, **kwargs)
