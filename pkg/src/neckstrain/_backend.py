"""Select the numeric kernel backend at import time.

The compiled extension (neckstrain._kernels, Cython) is preferred; the
pure-Python module (_kernels_py) is the fallback and the reference semantics.
Set NECKSTRAIN_PURE_PYTHON=1 to force the fallback, e.g. for benchmarking or
debugging. Both produce bit-identical results.
"""
from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("NECKSTRAIN_PURE_PYTHON") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

biquad_cascade = _impl.biquad_cascade
grow_tree = _impl.grow_tree
predict_tree = _impl.predict_tree


def available_backends() -> dict[str, object]:
    """Importable kernel modules keyed by backend name."""
    found: dict[str, object] = {"python": _kernels_py}
    try:
        from . import _kernels  # noqa: PLC0415

        found["compiled"] = _kernels
    except ImportError:
        pass
    return found
