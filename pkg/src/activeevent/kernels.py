"""Kernel backend selection.

The compiled extension is used when importable; ``ACTIVEEVENT_PURE_PYTHON=1``
forces the numpy fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("ACTIVEEVENT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

window_entropy = _impl.window_entropy
entropy_peaks = _impl.entropy_peaks
greedy_match_count = _impl.greedy_match_count
segment_argmin = _impl.segment_argmin

__all__ = ["BACKEND", "window_entropy", "entropy_peaks", "greedy_match_count", "segment_argmin"]
