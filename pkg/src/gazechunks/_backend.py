"""Kernel backend selection.

Prefers the compiled extension; falls back to numpy when the extension was
not built or GAZECHUNKS_PURE_PYTHON is set (useful for benchmarking and for
verifying that both backends agree).
"""

from __future__ import annotations

import os

import numpy as np

if os.environ.get("GAZECHUNKS_PURE_PYTHON"):
    from . import _kernels_np as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        from . import _kernels_np as _impl  # type: ignore[no-redef]

        BACKEND = "numpy"


def chunk_means_batch(values: np.ndarray, chunk_size: int) -> np.ndarray:
    """Per-sample chunk means over a (n_samples, total_dims) matrix."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    return _impl.chunk_means_batch(values, chunk_size)


def group_mean_var(chunk_means: np.ndarray, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-column sample mean and unbiased variance over the selected rows."""
    chunk_means = np.ascontiguousarray(chunk_means, dtype=np.float64)
    rows = np.ascontiguousarray(rows, dtype=np.intp)
    return _impl.group_mean_var(chunk_means, rows)
