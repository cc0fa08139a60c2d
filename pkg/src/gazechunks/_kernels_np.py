"""Numpy fallback for the compiled kernels in ``_kernels.pyx``.

Same contracts, pure numpy; selected by ``_backend`` when the extension is
unavailable or GAZECHUNKS_PURE_PYTHON is set.
"""

from __future__ import annotations

import numpy as np


def chunk_means_batch(values: np.ndarray, chunk_size: int) -> np.ndarray:
    """Per-sample chunk means: (n, k*chunk_size) -> (n, k)."""
    n, total = values.shape
    k = total // chunk_size
    # GEMV against a constant vector is the fastest reduction numpy offers here.
    weights = np.full(chunk_size, 1.0 / chunk_size)
    return (values.reshape(n * k, chunk_size) @ weights).reshape(n, k)


def group_mean_var(chunk_means: np.ndarray, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column-wise sample mean and unbiased variance over the given rows."""
    if rows.shape[0] < 2:
        raise ValueError("group_mean_var needs at least 2 rows")
    sub = chunk_means[rows]
    mean = sub.mean(axis=0)
    var = sub.var(axis=0, ddof=1)
    return mean, var
