"""Discovery of gaze-relevant chunks by two-group contrast.

Pipeline: split the dataset into a left-staring and a right-staring group
by yaw, compute per-chunk sample means and unbiased variances of the
chunk-mean values in each group, form the Welch-style statistic

    T_i = (mean_L_i - mean_R_i) / sqrt(var_L_i/n_L + var_R_i/n_R + eps),

convert to two-sided p-values under the standard normal (the groups are
large, so the difference of sample means is treated as Gaussian), rank
chunks by |T| descending, and select either the top-N chunks or all
chunks beyond a significance level.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _backend
from .core import (
    ConfigError,
    InsufficientDataError,
    LatentDataset,
    LatentLayout,
    LayoutError,
)

# Keeps T finite when both group variances are zero; a zero numerator
# then yields T = 0.
T_EPSILON = 1e-12

# Below this group size the Gaussian critical region is dubious and the
# report carries a warning flag.
SMALL_GROUP_SIZE = 30

DEFAULT_LEFT_RANGE = (30.0, 90.0)
DEFAULT_RIGHT_RANGE = (-90.0, -30.0)


@dataclass(frozen=True)
class GroupSplit:
    """Dataset partition into left-staring, right-staring, and excluded samples."""

    left: np.ndarray
    right: np.ndarray
    excluded: np.ndarray

    @property
    def n_left(self) -> int:
        return int(self.left.shape[0])

    @property
    def n_right(self) -> int:
        return int(self.right.shape[0])


@dataclass(frozen=True)
class ChunkStats:
    """Per-chunk group statistics of the chunk-mean values."""

    mean_left: np.ndarray
    var_left: np.ndarray
    mean_right: np.ndarray
    var_right: np.ndarray
    n_left: int
    n_right: int


@dataclass(frozen=True)
class SelectionMask:
    """Set of chunk indices marking gaze-relevant chunks.

    Indices are stored sorted ascending; the mask is the concrete
    realization of the manipulation operator over a layout.
    """

    layout: LatentLayout
    chunk_indices: tuple[int, ...]

    def __post_init__(self) -> None:
        idx = tuple(sorted(int(i) for i in self.chunk_indices))
        if len(set(idx)) != len(idx):
            raise LayoutError("mask contains duplicate chunk indices")
        if idx and (idx[0] < 0 or idx[-1] >= self.layout.n_chunks):
            raise LayoutError("mask contains chunk indices outside the layout")
        object.__setattr__(self, "chunk_indices", idx)

    def __len__(self) -> int:
        return len(self.chunk_indices)

    def __contains__(self, chunk_index: int) -> bool:
        return chunk_index in set(self.chunk_indices)

    def complement(self) -> "SelectionMask":
        rest = tuple(i for i in range(self.layout.n_chunks) if i not in set(self.chunk_indices))
        return SelectionMask(self.layout, rest)

    def element_indices(self) -> np.ndarray:
        """Flat latent-element indices covered by the masked chunks."""
        cs = self.layout.chunk_size
        chunks = np.asarray(self.chunk_indices, dtype=np.intp)
        if chunks.size == 0:
            return np.empty(0, dtype=np.intp)
        return (chunks[:, None] * cs + np.arange(cs, dtype=np.intp)).ravel()


@dataclass
class AnalyzeConfig:
    """Configuration for the end-to-end analysis pipeline.

    Exactly one of ``top_n`` / ``alpha`` drives selection; both unset
    means rank-only (no chunk is flagged selected).
    """

    left_range: tuple[float, float] = DEFAULT_LEFT_RANGE
    right_range: tuple[float, float] = DEFAULT_RIGHT_RANGE
    top_n: int | None = None
    alpha: float | None = 0.05
    seed: int | None = None


@dataclass
class AnalysisReport:
    """Full per-chunk record of the analysis pipeline."""

    layout: LatentLayout
    n_left: int
    n_right: int
    n_excluded: int
    mean_left: np.ndarray
    mean_right: np.ndarray
    var_left: np.ndarray
    var_right: np.ndarray
    mean_diff: np.ndarray
    t_stat: np.ndarray
    p_value: np.ndarray
    rank: np.ndarray
    selected: np.ndarray
    left_range: tuple[float, float]
    right_range: tuple[float, float]
    selection_mode: str = "none"
    selection_param: float | None = None
    small_group_warning: bool = False
    seed: int | None = None

    def selection_mask(self) -> SelectionMask:
        return SelectionMask(self.layout, tuple(int(i) for i in np.flatnonzero(self.selected)))


def _validate_range(r: tuple[float, float], name: str) -> tuple[float, float]:
    lo, hi = float(r[0]), float(r[1])
    if lo > hi:
        raise ConfigError(f"{name} range has lo > hi: {r}")
    return lo, hi


def split_groups(
    dataset: LatentDataset,
    left_range: tuple[float, float] = DEFAULT_LEFT_RANGE,
    right_range: tuple[float, float] = DEFAULT_RIGHT_RANGE,
) -> GroupSplit:
    """Assign samples to yaw ranges; endpoints are inclusive, pitch is ignored."""
    ll, lh = _validate_range(left_range, "left")
    rl, rh = _validate_range(right_range, "right")
    if max(ll, rl) <= min(lh, rh):
        raise ConfigError(f"group ranges overlap: {left_range} vs {right_range}")
    yaw = dataset.yaw_deg
    in_left = (yaw >= ll) & (yaw <= lh)
    in_right = (yaw >= rl) & (yaw <= rh)
    left = np.flatnonzero(in_left)
    right = np.flatnonzero(in_right)
    excluded = np.flatnonzero(~(in_left | in_right))
    return GroupSplit(left=left, right=right, excluded=excluded)


def group_chunk_stats(dataset: LatentDataset, split: GroupSplit) -> ChunkStats:
    """Sample mean and unbiased variance of the chunk means, per group."""
    if split.n_left < 2 or split.n_right < 2:
        raise InsufficientDataError(
            f"both groups need >= 2 samples (got left={split.n_left}, right={split.n_right})"
        )
    cm = dataset.chunk_mean_matrix()
    mean_l, var_l = _backend.group_mean_var(cm, split.left)
    mean_r, var_r = _backend.group_mean_var(cm, split.right)
    return ChunkStats(
        mean_left=mean_l,
        var_left=var_l,
        mean_right=mean_r,
        var_right=var_r,
        n_left=split.n_left,
        n_right=split.n_right,
    )


def t_statistic(stats: ChunkStats) -> np.ndarray:
    """Welch-style per-chunk statistic with an epsilon-guarded denominator."""
    if stats.n_left < 2 or stats.n_right < 2:
        raise InsufficientDataError("t_statistic needs n >= 2 in both groups")
    denom = np.sqrt(stats.var_left / stats.n_left + stats.var_right / stats.n_right + T_EPSILON)
    return (stats.mean_left - stats.mean_right) / denom


def p_value(t: float) -> float:
    """Two-sided tail probability of the standard normal: 2 * (1 - Phi(|t|))."""
    return math.erfc(abs(float(t)) / math.sqrt(2.0))


def p_values(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    return np.array([p_value(v) for v in t.ravel()]).reshape(t.shape)


def rank_chunks(t_stats: np.ndarray) -> np.ndarray:
    """Ranks 1..k by |T| descending; ties break toward the lower chunk index."""
    t_abs = np.abs(np.asarray(t_stats, dtype=np.float64))
    k = t_abs.shape[0]
    # lexsort's last key is primary: sort by -|T|, then index ascending
    # (implicit, because lexsort is stable over equal keys).
    order = np.lexsort((np.arange(k), -t_abs))
    ranks = np.empty(k, dtype=np.int64)
    ranks[order] = np.arange(1, k + 1)
    return ranks


def select_chunks(
    report: AnalysisReport, top_n: int | None = None, alpha: float | None = None
) -> SelectionMask:
    """Chunks selected by rank cutoff or by significance level.

    Exactly one of ``top_n`` / ``alpha`` must be given.
    """
    if (top_n is None) == (alpha is None):
        raise ConfigError("pass exactly one of top_n / alpha")
    if top_n is not None:
        if not 0 <= top_n <= report.layout.n_chunks:
            raise ConfigError(f"top_n {top_n} outside [0, {report.layout.n_chunks}]")
        chosen = np.flatnonzero(report.rank <= top_n)
    else:
        if not 0.0 < alpha < 1.0:
            raise ConfigError(f"alpha {alpha} outside (0, 1)")
        chosen = np.flatnonzero(report.p_value < alpha)
    return SelectionMask(report.layout, tuple(int(i) for i in chosen))


def analyze(dataset: LatentDataset, config: AnalyzeConfig | None = None) -> AnalysisReport:
    """Run split -> stats -> T -> p -> rank -> select and return the report."""
    config = config or AnalyzeConfig()
    if config.top_n is not None and config.alpha is not None:
        raise ConfigError("configure at most one of top_n / alpha")
    if len(dataset) == 0:
        raise InsufficientDataError("dataset is empty")

    split = split_groups(dataset, config.left_range, config.right_range)
    stats = group_chunk_stats(dataset, split)
    t = t_statistic(stats)
    p = p_values(t)
    ranks = rank_chunks(t)

    small = min(stats.n_left, stats.n_right) < SMALL_GROUP_SIZE
    if small:
        warnings.warn(
            f"group sizes {stats.n_left}/{stats.n_right} below {SMALL_GROUP_SIZE}; "
            "the Gaussian critical region is approximate",
            stacklevel=2,
        )

    report = AnalysisReport(
        layout=dataset.layout,
        n_left=stats.n_left,
        n_right=stats.n_right,
        n_excluded=int(split.excluded.shape[0]),
        mean_left=stats.mean_left,
        mean_right=stats.mean_right,
        var_left=stats.var_left,
        var_right=stats.var_right,
        mean_diff=stats.mean_left - stats.mean_right,
        t_stat=t,
        p_value=p,
        rank=ranks,
        selected=np.zeros(dataset.layout.n_chunks, dtype=bool),
        left_range=(float(config.left_range[0]), float(config.left_range[1])),
        right_range=(float(config.right_range[0]), float(config.right_range[1])),
        small_group_warning=small,
        seed=config.seed,
    )

    if config.top_n is not None:
        mask = select_chunks(report, top_n=config.top_n)
        report.selection_mode = "top_n"
        report.selection_param = float(config.top_n)
    elif config.alpha is not None:
        mask = select_chunks(report, alpha=config.alpha)
        report.selection_mode = "alpha"
        report.selection_param = float(config.alpha)
    else:
        return report

    report.selected[list(mask.chunk_indices)] = True
    return report
