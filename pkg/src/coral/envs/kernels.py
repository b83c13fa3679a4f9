"""Stepping-kernel backend selection.

Prefers the compiled Cython module; falls back to the numpy reference
implementation when the extension is unavailable or when the environment
variable CORAL_FORCE_PY_KERNELS is set (used by the equivalence tests and
the benchmark).
"""

from __future__ import annotations

import os

from . import _grid_py

if os.environ.get("CORAL_FORCE_PY_KERNELS"):
    _impl = _grid_py
    BACKEND = "python"
else:
    try:
        from . import _grid_cy as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _grid_py
        BACKEND = "python"

step_kernel = _impl.step_kernel
observe_kernel = _impl.observe_kernel


def backends() -> dict[str, object]:
    """All importable kernel backends, keyed by name."""
    out: dict[str, object] = {"python": _grid_py}
    try:
        from . import _grid_cy  # type: ignore[attr-defined]

        out["cython"] = _grid_cy
    except ImportError:
        pass
    return out
