"""Shared fixtures and oracle helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from gazechunks.core import GazeLabel, LatentCode, LatentDataset, LatentLayout

SMALL_LAYOUT = LatentLayout(n_layers=2, layer_dim=32, chunk_size=16)  # 4 chunks, 64 dims
MID_LAYOUT = LatentLayout(n_layers=4, layer_dim=64, chunk_size=16)  # 16 chunks, 256 dims


def random_code(layout: LatentLayout, rng: np.random.Generator) -> LatentCode:
    return LatentCode(layout, rng.normal(0.0, 1.0, layout.total_dims))


def make_dataset(
    layout: LatentLayout,
    codes: np.ndarray,
    yaw_deg: np.ndarray,
    pitch_deg: np.ndarray | None = None,
) -> LatentDataset:
    n = codes.shape[0]
    if pitch_deg is None:
        pitch_deg = np.zeros(n)
    ids = [f"s{i:05d}" for i in range(n)]
    return LatentDataset(layout, ids, codes, yaw_deg, pitch_deg)


def brute_force_chunk_means(values: np.ndarray, chunk_size: int) -> np.ndarray:
    """Window-sum oracle: explicit python loop, independent of the kernels."""
    k = len(values) // chunk_size
    out = np.empty(k)
    for i in range(k):
        acc = 0.0
        for j in range(chunk_size):
            acc += values[i * chunk_size + j]
        out[i] = acc / chunk_size
    return out


def two_pass_mean_var(values: np.ndarray) -> tuple[float, float]:
    """Brute-force two-pass mean and unbiased variance of a 1-D sample."""
    n = len(values)
    mean = sum(float(v) for v in values) / n
    var = sum((float(v) - mean) ** 2 for v in values) / (n - 1)
    return mean, var


def regressor_fd_worst(params, codes, labels, step=1e-5, floor=1e-3) -> float:
    """Max relative error of analytic regressor grads vs central differences."""
    from gazechunks import regressor

    _, grads = regressor.loss_and_gradients(params, codes, labels)
    worst = 0.0
    for name in ("attention_logits", "w1", "b1", "w2", "b2"):
        flat = getattr(params, name).ravel()
        g = getattr(grads, name).ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up, _ = regressor.loss_and_gradients(params, codes, labels)
            flat[i] = orig - step
            down, _ = regressor.loss_and_gradients(params, codes, labels)
            flat[i] = orig
            numeric = (up - down) / (2.0 * step)
            worst = max(worst, abs(g[i] - numeric) / max(abs(g[i]), abs(numeric), floor))
    return worst


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)


@pytest.fixture
def small_layout() -> LatentLayout:
    return SMALL_LAYOUT


def label(yaw: float, pitch: float = 0.0) -> GazeLabel:
    return GazeLabel(yaw_deg=yaw, pitch_deg=pitch)
