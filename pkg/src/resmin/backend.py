"""Kernel backend selection.

The compiled extension is preferred when importable; set
RESMIN_BACKEND=python to force the numpy fallback or
RESMIN_BACKEND=cython to fail loudly when the extension is missing.
"""

import os

import numpy as np

from . import _fallback

__all__ = ["BACKEND", "accumulate_blocks", "accumulate_vectors"]

_requested = os.environ.get("RESMIN_BACKEND", "").strip().lower()
if _requested not in ("", "cython", "python"):
    raise ValueError(f"RESMIN_BACKEND must be 'cython' or 'python', got {_requested!r}")

_kernels = None
if _requested != "python":
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        if _requested == "cython":
            raise
        _kernels = None

BACKEND = "cython" if _kernels is not None else "python"


def _contiguous(a):
    return np.ascontiguousarray(a, dtype=np.float64)


if _kernels is not None:

    def accumulate_blocks(test, trial, weights):
        return _kernels.accumulate_blocks(
            _contiguous(test), _contiguous(trial), _contiguous(weights)
        )

    def accumulate_vectors(test, weights):
        return _kernels.accumulate_vectors(_contiguous(test), _contiguous(weights))

else:
    accumulate_blocks = _fallback.accumulate_blocks
    accumulate_vectors = _fallback.accumulate_vectors


accumulate_blocks.__doc__ = _fallback.accumulate_blocks.__doc__
accumulate_vectors.__doc__ = _fallback.accumulate_vectors.__doc__
