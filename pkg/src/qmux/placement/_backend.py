"""Kernel backend selection: compiled extension if available, else Python.

Set QMUX_SA_BACKEND=python or QMUX_SA_BACKEND=compiled to force a
choice; forcing "compiled" when the extension failed to build raises
immediately rather than silently falling back.
"""

from __future__ import annotations

import os

from . import _sa_py

try:
    from . import _sa_cy

    _COMPILED = _sa_cy
except ImportError:
    _COMPILED = None


class BackendError(RuntimeError):
    pass


def get_backend(name: str | None = None):
    """Resolve a kernel module by name, env override, or availability."""
    if name is None:
        name = os.environ.get("QMUX_SA_BACKEND", "").strip() or None
    if name is None:
        return _COMPILED if _COMPILED is not None else _sa_py
    if name == "python":
        return _sa_py
    if name == "compiled":
        if _COMPILED is None:
            raise BackendError(
                "compiled kernel requested but the extension is not built"
            )
        return _COMPILED
    raise BackendError(f"unknown backend {name!r} (use 'python' or 'compiled')")


def backend_name(name: str | None = None) -> str:
    return get_backend(name).BACKEND_NAME


def available_backends() -> tuple[str, ...]:
    return ("python", "compiled") if _COMPILED is not None else ("python",)
