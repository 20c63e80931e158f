"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy implementation in ``_pykernels`` takes over. Both expose the same four
functions.
"""

from __future__ import annotations

from types import ModuleType

from . import _pykernels

try:
    from . import _ckernels  # type: ignore[attr-defined]
except ImportError:  # extension not built
    _ckernels = None

kernels: ModuleType = _ckernels if _ckernels is not None else _pykernels
BACKEND: str = "cython" if _ckernels is not None else "python"


def available_backends() -> list[str]:
    return ["cython", "python"] if _ckernels is not None else ["python"]


def get_kernels(name: str) -> ModuleType:
    if name == "python":
        return _pykernels
    if name == "cython":
        if _ckernels is None:
            raise ImportError("compiled kernels are not built")
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


def set_backend(name: str) -> None:
    """Switch the process-wide kernel backend (benchmarks and tests)."""
    global kernels, BACKEND
    kernels = get_kernels(name)
    BACKEND = name


def current() -> ModuleType:
    return kernels


__all__ = ["BACKEND", "available_backends", "current", "get_kernels", "set_backend"]
