"""Latent-only gaze regression head with per-chunk attention gating.

Architecture: each masked chunk's elements are multiplied by a sigmoid
gate (one learnable logit per chunk), the gated elements are flattened
and passed through an affine+ReLU hidden layer and an affine output
layer producing (yaw, pitch) in radians.  Training is plain minibatch
gradient descent with optional momentum on a mean squared angle loss;
all gradients are analytic (verified against central finite differences
in the test suite).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import SelectionMask, rank_chunks
from .core import (
    ConfigError,
    InsufficientDataError,
    LatentCode,
    LatentDataset,
    LayoutError,
    TrainingDivergedError,
    angles_to_vector,
)

INIT_SCALE = 0.05  # seeded uniform init in [-INIT_SCALE, INIT_SCALE]


@dataclass
class RegressorParams:
    """Weights of the gated two-layer gaze head, tied to a selection mask.

    ``attention_logits`` spans every chunk of the layout; only the masked
    entries influence the forward pass (the rest receive zero gradient).
    """

    mask: SelectionMask
    attention_logits: np.ndarray  # (n_chunks,)
    w1: np.ndarray  # (input_dim, hidden)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden, 2)
    b2: np.ndarray  # (2,)

    def __post_init__(self) -> None:
        in_dim = len(self.mask) * self.mask.layout.chunk_size
        if self.attention_logits.shape != (self.mask.layout.n_chunks,):
            raise LayoutError("attention_logits must cover every chunk of the layout")
        if self.w1.shape[0] != in_dim or self.w1.shape[1] != self.b1.shape[0]:
            raise LayoutError("first-layer shapes inconsistent with the mask")
        if self.w2.shape != (self.b1.shape[0], 2) or self.b2.shape != (2,):
            raise LayoutError("output-layer shapes inconsistent")
        for arr in (self.attention_logits, self.w1, self.b1, self.w2, self.b2):
            if not np.all(np.isfinite(arr)):
                raise LayoutError("parameters contain non-finite values")

    @property
    def hidden_dim(self) -> int:
        return int(self.b1.shape[0])

    @property
    def input_dim(self) -> int:
        return int(self.w1.shape[0])

    def copy(self) -> "RegressorParams":
        return RegressorParams(
            mask=self.mask,
            attention_logits=self.attention_logits.copy(),
            w1=self.w1.copy(),
            b1=self.b1.copy(),
            w2=self.w2.copy(),
            b2=self.b2.copy(),
        )


@dataclass
class RegressorGrads:
    attention_logits: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray


@dataclass
class TrainConfig:
    """Gradient-descent schedule shared by the trainable components."""

    learning_rate: float = 0.05
    epochs: int = 200
    batch_size: int = 128
    seed: int = 0
    momentum: float = 0.0
    hidden_dim: int = 128

    def __post_init__(self) -> None:
        # zero learning rate / zero epochs are legal no-op budgets
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError("momentum must lie in [0, 1)")


@dataclass
class SensitivityReport:
    """Per-chunk mean absolute output-input gradient magnitudes."""

    chunk_scores: np.ndarray  # (n_chunks,), zero outside the mask
    rank: np.ndarray  # 1 = highest score, ties toward lower index

    def top(self, n: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.rank <= n))


def init_params(mask: SelectionMask, hidden_dim: int = 128, seed: int = 0) -> RegressorParams:
    """Seeded uniform initialization; draw order fixes bit-reproducibility."""
    rng = np.random.default_rng(seed)
    layout = mask.layout
    in_dim = len(mask) * layout.chunk_size
    u = lambda *shape: rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape)
    return RegressorParams(
        mask=mask,
        attention_logits=u(layout.n_chunks),
        w1=u(in_dim, hidden_dim),
        b1=u(hidden_dim),
        w2=u(hidden_dim, 2),
        b2=u(2),
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):  # exp overflow saturates to a 0 gate
        return 1.0 / (1.0 + np.exp(-x))


def _gather(params: RegressorParams, codes: np.ndarray) -> np.ndarray:
    """Raw masked elements as (batch, n_masked_chunks, chunk_size)."""
    cs = params.mask.layout.chunk_size
    elems = params.mask.element_indices()
    return codes[:, elems].reshape(codes.shape[0], len(params.mask), cs)


def _forward_parts(params: RegressorParams, codes: np.ndarray):
    mask_idx = np.asarray(params.mask.chunk_indices, dtype=np.intp)
    gates = _sigmoid(params.attention_logits[mask_idx])
    xm = _gather(params, codes)
    z0 = (xm * gates[None, :, None]).reshape(codes.shape[0], params.input_dim)
    z1 = z0 @ params.w1 + params.b1
    a1 = np.maximum(z1, 0.0)
    y = a1 @ params.w2 + params.b2
    return xm, gates, z0, z1, a1, y


def forward_batch(params: RegressorParams, codes: np.ndarray) -> np.ndarray:
    """(batch, 2) predicted (yaw, pitch) in radians."""
    codes = np.asarray(codes, dtype=np.float64)
    if codes.ndim != 2 or codes.shape[1] != params.mask.layout.total_dims:
        raise LayoutError("codes matrix does not match the model layout")
    return _forward_parts(params, codes)[-1]


def forward(params: RegressorParams, code: LatentCode) -> tuple[float, float]:
    """Predicted (yaw_rad, pitch_rad) for one latent code."""
    if code.layout != params.mask.layout:
        raise LayoutError("code layout does not match the model layout")
    y = forward_batch(params, code.values[None, :])[0]
    return float(y[0]), float(y[1])


def loss_and_gradients(
    params: RegressorParams, codes: np.ndarray, labels_rad: np.ndarray
) -> tuple[float, RegressorGrads]:
    """Batch MSE on radian angle pairs and its exact parameter gradients."""
    codes = np.asarray(codes, dtype=np.float64)
    labels = np.asarray(labels_rad, dtype=np.float64)
    if codes.shape[0] == 0:
        raise InsufficientDataError("empty batch")
    b = codes.shape[0]
    xm, gates, z0, z1, a1, y = _forward_parts(params, codes)

    resid = y - labels
    loss = float(np.sum(resid * resid) / b)

    dy = 2.0 * resid / b
    dw2 = a1.T @ dy
    db2 = dy.sum(axis=0)
    dz1 = (dy @ params.w2.T) * (z1 > 0.0)
    dw1 = z0.T @ dz1
    db1 = dz1.sum(axis=0)
    dz0 = (dz1 @ params.w1.T).reshape(xm.shape)
    dgates = np.einsum("bmc,bmc->m", dz0, xm)
    dlogits = np.zeros_like(params.attention_logits)
    mask_idx = np.asarray(params.mask.chunk_indices, dtype=np.intp)
    dlogits[mask_idx] = dgates * gates * (1.0 - gates)

    return loss, RegressorGrads(dlogits, dw1, db1, dw2, db2)


def train(dataset: LatentDataset, mask: SelectionMask, config: TrainConfig) -> RegressorParams:
    """Minibatch gradient descent from the seeded initialization.

    Deterministic for a fixed seed/config/data; raises
    TrainingDivergedError (carrying the last finite epoch snapshot) if
    the loss leaves the finite range.
    """
    if len(dataset) == 0:
        raise InsufficientDataError("cannot train on an empty dataset")
    if mask.layout != dataset.layout:
        raise LayoutError("mask layout does not match the dataset")

    x = dataset.codes
    labels = np.stack([np.radians(dataset.yaw_deg), np.radians(dataset.pitch_deg)], axis=1)
    params = init_params(mask, hidden_dim=config.hidden_dim, seed=config.seed)
    if config.learning_rate == 0.0:
        return params

    rng = np.random.default_rng(config.seed + 1)
    vel = RegressorGrads(
        np.zeros_like(params.attention_logits),
        np.zeros_like(params.w1),
        np.zeros_like(params.b1),
        np.zeros_like(params.w2),
        np.zeros_like(params.b2),
    )
    snapshot = params.copy()
    n = x.shape[0]
    # overflow during a diverging run is the detection signal, not an anomaly
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(config.epochs):
            order = rng.permutation(n)
            for start in range(0, n, config.batch_size):
                batch = order[start : start + config.batch_size]
                loss, grads = loss_and_gradients(params, x[batch], labels[batch])
                if not math.isfinite(loss):
                    raise TrainingDivergedError(
                        f"loss became non-finite at epoch {epoch}",
                        last_params=snapshot,
                        epoch=epoch,
                    )
                for name in ("attention_logits", "w1", "b1", "w2", "b2"):
                    v = getattr(vel, name)
                    v *= config.momentum
                    v -= config.learning_rate * getattr(grads, name)
                    getattr(params, name)[...] += v
            try:
                snapshot = params.copy()
            except LayoutError:  # params blew past finite range at epoch end
                raise TrainingDivergedError(
                    f"parameters became non-finite at epoch {epoch}",
                    last_params=snapshot,
                    epoch=epoch,
                ) from None
    return params


def evaluate(params: RegressorParams, dataset: LatentDataset) -> float:
    """Mean 3D angular error in degrees over the dataset."""
    if len(dataset) == 0:
        raise InsufficientDataError("cannot evaluate on an empty dataset")
    pred = forward_batch(params, dataset.codes)
    pred_vec = angles_to_vector(pred[:, 0], pred[:, 1])
    true_vec = angles_to_vector(np.radians(dataset.yaw_deg), np.radians(dataset.pitch_deg))
    cos = np.clip(np.sum(pred_vec * true_vec, axis=1), -1.0, 1.0)
    return float(np.degrees(np.arccos(cos)).mean())


def gradient_sensitivity(params: RegressorParams, dataset: LatentDataset) -> SensitivityReport:
    """Mean |d yaw / dx| + |d pitch / dx| per element, averaged within chunks.

    Chunks outside the model's mask cannot influence the output and score
    zero.  Ranking follows the same descending/stable rule as the
    statistical chunk ranking.
    """
    codes = dataset.codes
    xm, gates, z0, z1, a1, y = _forward_parts(params, codes)
    relu_grad = (z1 > 0.0).astype(np.float64)

    layout = params.mask.layout
    per_elem = np.zeros(params.input_dim)
    for k in range(2):
        # d y_k / d z0 for every sample, then through the gates to raw inputs
        jz0 = (relu_grad * params.w2[:, k][None, :]) @ params.w1.T
        jraw = jz0.reshape(xm.shape) * gates[None, :, None]
        per_elem += np.abs(jraw).mean(axis=0).ravel()

    scores = np.zeros(layout.n_chunks)
    mask_idx = np.asarray(params.mask.chunk_indices, dtype=np.intp)
    scores[mask_idx] = per_elem.reshape(len(params.mask), layout.chunk_size).mean(axis=1)
    return SensitivityReport(chunk_scores=scores, rank=rank_chunks(scores))
