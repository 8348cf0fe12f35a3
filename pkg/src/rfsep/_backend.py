"""Kernel backend selection.

Set ``RFSEP_BACKEND=numpy`` to force the pure-numpy kernels or
``RFSEP_BACKEND=numba`` to require the jitted ones. Unset, the jitted
backend is used when numba imports cleanly, with a silent numpy fallback
otherwise. Both backends are single-threaded and run-to-run deterministic;
they may differ from each other by accumulation-order rounding only.
"""
from __future__ import annotations

import os


def _load():
    forced = os.environ.get("RFSEP_BACKEND", "").strip().lower()
    if forced == "numpy":
        from . import _kernels_numpy as mod
        return mod
    if forced == "numba":
        from . import _kernels_numba as mod
        return mod
    if forced:
        raise ValueError(
            f"RFSEP_BACKEND={forced!r} is not recognized (use 'numpy' or 'numba')"
        )
    try:
        from . import _kernels_numba as mod
    except ImportError:
        from . import _kernels_numpy as mod
    return mod


kernels = _load()
BACKEND_NAME: str = kernels.BACKEND
