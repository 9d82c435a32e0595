"""Kernel backend selection.

Two interchangeable implementations of the hot loops (one SGD epoch, batch
pair scoring): a compiled Cython extension (_fast) and a numpy reference
(pure). The compiled one is picked when importable; set SEMRANK_BACKEND to
"pure" or "fast" to force a choice. Per-pair update order is identical in
both, so results agree to floating-point round-off; any single backend is
bitwise deterministic.
"""

from __future__ import annotations

import os

from . import pure

try:
    from . import _fast
except ImportError:  # extension not built
    _fast = None

_ENV_VAR = "SEMRANK_BACKEND"


def available_backends() -> tuple[str, ...]:
    return ("pure", "fast") if _fast is not None else ("pure",)


def default_backend_name() -> str:
    env = os.environ.get(_ENV_VAR)
    if env:
        return env
    return "fast" if _fast is not None else "pure"


def get_backend(name: str | None = None):
    """Resolve a backend module by name (None = SEMRANK_BACKEND or best)."""
    resolved = name or default_backend_name()
    if resolved == "pure":
        return pure
    if resolved == "fast":
        if _fast is None:
            raise RuntimeError(
                "compiled kernel requested but not built; "
                "reinstall with a C toolchain or set SEMRANK_BACKEND=pure"
            )
        return _fast
    raise ValueError(f"unknown backend {resolved!r}; expected 'pure' or 'fast'")
