"""Domain types, latent layout arithmetic, gaze geometry, and the angular-error metric.

Conventions used across the package:

* Latent codes are flat float64 vectors with a layered layout
  (``n_layers`` x ``layer_dim``), partitioned into chunks of
  ``chunk_size`` consecutive elements.  The default (14, 512, 16) layout
  yields 448 chunks.
* Gaze labels are (yaw, pitch) angle pairs in degrees.  The 3D gaze
  vector lives in a camera frame with +x right, +y up, +z forward; yaw
  rotates about y, pitch about x, so (0, 0) maps to (0, 0, 1).
* All operations here are pure functions over immutable inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend


class GazeChunksError(Exception):
    """Base class for errors raised by this package."""


class LayoutError(GazeChunksError):
    """Structural mismatch between declared layout and actual data."""


class ConfigError(GazeChunksError):
    """Invalid configuration (ranges, modes, missing donors, ...)."""


class FormatError(GazeChunksError):
    """Malformed or inconsistent on-disk file."""


class InsufficientDataError(GazeChunksError):
    """An operation received fewer samples than it requires."""


class TrainingDivergedError(GazeChunksError):
    """Loss became non-finite during training.

    ``last_params`` holds the last finite parameter state, ``epoch`` the
    epoch at which divergence was detected.
    """

    def __init__(self, message: str, last_params=None, epoch: int | None = None):
        super().__init__(message)
        self.last_params = last_params
        self.epoch = epoch


@dataclass(frozen=True)
class LatentLayout:
    """Layered layout of a flat latent vector.

    ``layer_dim`` must be divisible by ``chunk_size``; chunks never span
    layer boundaries.
    """

    n_layers: int
    layer_dim: int
    chunk_size: int = 16

    def __post_init__(self) -> None:
        if self.n_layers < 1 or self.layer_dim < 1 or self.chunk_size < 1:
            raise LayoutError("layout dimensions must be positive")
        if self.layer_dim % self.chunk_size != 0:
            raise LayoutError(
                f"layer_dim {self.layer_dim} not divisible by chunk_size {self.chunk_size}"
            )

    @property
    def total_dims(self) -> int:
        return self.n_layers * self.layer_dim

    @property
    def n_chunks(self) -> int:
        return self.total_dims // self.chunk_size

    @property
    def chunks_per_layer(self) -> int:
        return self.layer_dim // self.chunk_size

    def layer_of_chunk(self, chunk_index: int) -> int:
        """Zero-based layer index that owns the given chunk."""
        if not 0 <= chunk_index < self.n_chunks:
            raise LayoutError(f"chunk index {chunk_index} out of range")
        return chunk_index // self.chunks_per_layer

    def layer_chunks(self, layer: int) -> range:
        """Chunk indices belonging to a zero-based layer."""
        if not 0 <= layer < self.n_layers:
            raise LayoutError(f"layer {layer} out of range")
        start = layer * self.chunks_per_layer
        return range(start, start + self.chunks_per_layer)


DEFAULT_LAYOUT = LatentLayout(n_layers=14, layer_dim=512, chunk_size=16)


@dataclass(frozen=True)
class LatentCode:
    """One sample's latent vector with its declared layout."""

    layout: LatentLayout
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.shape[0] != self.layout.total_dims:
            raise LayoutError(
                f"latent vector has length {values.shape}, layout expects {self.layout.total_dims}"
            )
        if not np.all(np.isfinite(values)):
            raise LayoutError("latent vector contains non-finite values")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class GazeLabel:
    """Gaze direction as yaw/pitch in degrees."""

    yaw_deg: float
    pitch_deg: float

    def __post_init__(self) -> None:
        if not (-180.0 <= self.yaw_deg <= 180.0):
            raise ValueError(f"yaw {self.yaw_deg} outside [-180, 180]")
        if not (-90.0 <= self.pitch_deg <= 90.0):
            raise ValueError(f"pitch {self.pitch_deg} outside [-90, 90]")


@dataclass
class LatentDataset:
    """Aligned set of latent codes and gaze labels sharing one layout.

    Stored column-wise (one (n, total_dims) matrix plus label vectors) so
    the statistics pipeline can run vectorized; per-sample accessors
    return the domain types.
    """

    layout: LatentLayout
    sample_ids: list[str]
    codes: np.ndarray
    yaw_deg: np.ndarray
    pitch_deg: np.ndarray

    def __post_init__(self) -> None:
        self.codes = np.asarray(self.codes, dtype=np.float64)
        self.yaw_deg = np.asarray(self.yaw_deg, dtype=np.float64)
        self.pitch_deg = np.asarray(self.pitch_deg, dtype=np.float64)
        n = len(self.sample_ids)
        if self.codes.shape != (n, self.layout.total_dims):
            raise LayoutError(
                f"codes shape {self.codes.shape} does not match "
                f"{n} samples x {self.layout.total_dims} dims"
            )
        if self.yaw_deg.shape != (n,) or self.pitch_deg.shape != (n,):
            raise LayoutError("label arrays do not match the sample count")
        if not np.all(np.isfinite(self.codes)):
            raise LayoutError("dataset contains non-finite latent values")
        if len(set(self.sample_ids)) != n:
            raise LayoutError("sample ids are not unique")

    @classmethod
    def from_samples(
        cls, layout: LatentLayout, samples: list[tuple[str, LatentCode, GazeLabel]]
    ) -> "LatentDataset":
        ids = [s[0] for s in samples]
        for _, code, _ in samples:
            if code.layout != layout:
                raise LayoutError("sample layout differs from dataset layout")
        codes = np.stack([s[1].values for s in samples]) if samples else np.empty((0, layout.total_dims))
        yaw = np.array([s[2].yaw_deg for s in samples], dtype=np.float64)
        pitch = np.array([s[2].pitch_deg for s in samples], dtype=np.float64)
        return cls(layout, ids, codes, yaw, pitch)

    def __len__(self) -> int:
        return len(self.sample_ids)

    def code(self, i: int) -> LatentCode:
        return LatentCode(self.layout, self.codes[i].copy())

    def label(self, i: int) -> GazeLabel:
        return GazeLabel(float(self.yaw_deg[i]), float(self.pitch_deg[i]))

    def chunk_mean_matrix(self) -> np.ndarray:
        """(n_samples, n_chunks) matrix of per-sample chunk means."""
        return _backend.chunk_means_batch(self.codes, self.layout.chunk_size)


def chunk_means(code: LatentCode) -> np.ndarray:
    """Mean of each chunk_size-element window of the latent vector."""
    return _backend.chunk_means_batch(code.values[None, :], code.layout.chunk_size)[0]


def angles_to_vector(yaw_rad, pitch_rad) -> np.ndarray:
    """3D unit gaze vector(s) from yaw/pitch in radians.

    Accepts scalars or equally-shaped arrays; the vector components land
    on the last axis.
    """
    yaw = np.asarray(yaw_rad, dtype=np.float64)
    pitch = np.asarray(pitch_rad, dtype=np.float64)
    cp = np.cos(pitch)
    return np.stack([cp * np.sin(yaw), np.sin(pitch), cp * np.cos(yaw)], axis=-1)


def gaze_to_vector(label: GazeLabel) -> np.ndarray:
    """3D unit gaze vector for a degree-valued label."""
    return angles_to_vector(math.radians(label.yaw_deg), math.radians(label.pitch_deg))


def angular_error(pred: np.ndarray, truth: np.ndarray) -> float:
    """Angle in degrees between two gaze vectors.

    The cosine is clamped to [-1, 1] to absorb floating-point overshoot;
    zero-length inputs are rejected.
    """
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    np_pred = float(np.linalg.norm(pred))
    np_truth = float(np.linalg.norm(truth))
    if np_pred == 0.0 or np_truth == 0.0:
        raise ValueError("angular_error requires nonzero vectors")
    cos = float(np.dot(pred, truth)) / (np_pred * np_truth)
    return math.degrees(math.acos(max(-1.0, min(1.0, cos))))
