"""Synthetic latent-space generator with planted gaze-relevant chunks.

Every element of a sample is Gaussian noise; elements of the planted
chunks additionally receive ``effect_size * (yaw / 90) * noise_std``, so
the planted set carries the weakest structure (a linear-in-yaw mean
shift) that the group-contrast statistic can detect.  Confound chunk
sets receive the same kind of term scaled by a correlation coefficient
that may differ between the train role and the test role of a dataset,
modeling gaze-irrelevant structure that does not transfer across
domains.

Generation is counter-based: sample ``i`` is drawn from its own Philox
stream keyed by the spec seed with counter ``i``, so the seed-to-sample
mapping is independent of the sample count and of any parallel split.
Values are quantized to float32 (the on-disk precision), which makes the
in-memory pipeline and the file-mediated pipeline agree exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .analysis import SelectionMask
from .core import ConfigError, DEFAULT_LAYOUT, LatentDataset, LatentLayout


@dataclass(frozen=True)
class NuisanceConfound:
    """Chunk set correlated with yaw at train time but not (necessarily) at test time."""

    chunks: tuple[int, ...]
    train_corr: float
    test_corr: float = 0.0


def default_planted_chunks(layout: LatentLayout) -> tuple[int, ...]:
    """Chunks of layers 4 and 5 (zero-based); 128..191 under the default layout."""
    if layout.n_layers < 6:
        raise ConfigError(
            "default planted chunks live in layers 4-5; pass planted_chunks "
            f"explicitly for a {layout.n_layers}-layer layout"
        )
    return tuple(layout.layer_chunks(4)) + tuple(layout.layer_chunks(5))


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic dataset."""

    n_samples: int
    layout: LatentLayout = DEFAULT_LAYOUT
    planted_chunks: tuple[int, ...] | None = None
    effect_size: float = 1.0
    nuisance: tuple[NuisanceConfound, ...] = ()
    noise_std: float = 1.0
    yaw_range: tuple[float, float] = (-90.0, 90.0)
    pitch_range: tuple[float, float] = (0.0, 0.0)
    offset: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_samples < 4:
            raise ConfigError("n_samples must be >= 4")
        if self.noise_std <= 0:
            raise ConfigError("noise_std must be positive")
        if self.effect_size < 0:
            raise ConfigError("effect_size must be nonnegative")
        planted = self.planted_chunks
        if planted is None:
            planted = default_planted_chunks(self.layout)
        planted = tuple(sorted(int(c) for c in planted))
        object.__setattr__(self, "planted_chunks", planted)
        k = self.layout.n_chunks
        taken = set(planted)
        if planted and (planted[0] < 0 or planted[-1] >= k):
            raise ConfigError("planted chunks outside the layout")
        for conf in self.nuisance:
            cs = set(conf.chunks)
            if any(c < 0 or c >= k for c in cs):
                raise ConfigError("nuisance chunks outside the layout")
            if cs & taken:
                raise ConfigError("planted and nuisance chunk sets must be disjoint")
            taken |= cs
        for name, (lo, hi), (dlo, dhi) in (
            ("yaw_range", self.yaw_range, (-180.0, 180.0)),
            ("pitch_range", self.pitch_range, (-90.0, 90.0)),
        ):
            if lo > hi or lo < dlo or hi > dhi:
                raise ConfigError(f"{name} {lo}:{hi} invalid")

    def planted_mask(self) -> SelectionMask:
        return SelectionMask(self.layout, self.planted_chunks)


@dataclass(frozen=True)
class DomainPairSpec:
    """Source/target pair sharing the planted signal.

    The target dataset is generated with each confound's test-time
    correlation, its own seed, and an additive element offset; everything
    else is inherited from the source spec.
    """

    source: SynthSpec
    target_seed: int | None = None
    target_n_samples: int | None = None
    target_offset: float = 0.0


def _chunk_elements(layout: LatentLayout, chunks: tuple[int, ...]) -> np.ndarray:
    cs = layout.chunk_size
    idx = np.asarray(chunks, dtype=np.intp)
    if idx.size == 0:
        return np.empty(0, dtype=np.intp)
    return (idx[:, None] * cs + np.arange(cs, dtype=np.intp)).ravel()


def generate(spec: SynthSpec, use_test_corr: bool = False) -> LatentDataset:
    """Materialize a dataset; ``use_test_corr`` switches the confound role."""
    layout = spec.layout
    d = layout.total_dims
    planted_elems = _chunk_elements(layout, spec.planted_chunks)
    confounds = [
        (_chunk_elements(layout, c.chunks), c.test_corr if use_test_corr else c.train_corr)
        for c in spec.nuisance
    ]

    # values live at on-disk (float32) precision so file round-trips are
    # exact; doing the arithmetic in float32 halves the generation cost
    codes = np.empty((spec.n_samples, d), dtype=np.float32)
    yaw = np.empty(spec.n_samples)
    pitch = np.empty(spec.n_samples)
    noise_std = np.float32(spec.noise_std)
    for i in range(spec.n_samples):
        rng = np.random.Generator(np.random.Philox(key=spec.seed, counter=[0, 0, 0, i]))
        yaw[i] = rng.uniform(spec.yaw_range[0], spec.yaw_range[1])
        pitch[i] = rng.uniform(spec.pitch_range[0], spec.pitch_range[1])
        row = codes[i]
        rng.standard_normal(d, dtype=np.float32, out=row)
        if spec.noise_std != 1.0:
            row *= noise_std
        t = yaw[i] / 90.0
        if planted_elems.size:
            row[planted_elems] += np.float32(spec.effect_size * t * spec.noise_std)
        for elems, corr in confounds:
            if elems.size and corr != 0.0:
                row[elems] += np.float32(corr * t * spec.noise_std)
        if spec.offset != 0.0:
            row += np.float32(spec.offset)
    ids = [f"s{i:06d}" for i in range(spec.n_samples)]
    return LatentDataset(layout, ids, codes.astype(np.float64), yaw, pitch)


def generate_domain_pair(pair: DomainPairSpec) -> tuple[LatentDataset, LatentDataset]:
    """Source dataset (train-role confounds) and target dataset (test-role)."""
    source = generate(pair.source)
    target_spec = replace(
        pair.source,
        seed=pair.target_seed if pair.target_seed is not None else pair.source.seed + 1,
        n_samples=pair.target_n_samples or pair.source.n_samples,
        offset=pair.target_offset,
    )
    target = generate(target_spec, use_test_corr=True)
    return source, target


@dataclass(frozen=True)
class MaskAccuracy:
    precision: float
    recall: float
    true_positives: int
    n_planted: int
    n_selected: int


def oracle_report(spec: SynthSpec, mask: SelectionMask) -> MaskAccuracy:
    """Precision/recall of a selection mask against the planted ground truth.

    The empty mask has precision 1.0 by convention.
    """
    if mask.layout != spec.layout:
        raise ConfigError("mask layout does not match the spec")
    planted = set(spec.planted_chunks)
    selected = set(mask.chunk_indices)
    tp = len(planted & selected)
    precision = tp / len(selected) if selected else 1.0
    recall = tp / len(planted) if planted else 1.0
    return MaskAccuracy(
        precision=precision,
        recall=recall,
        true_positives=tp,
        n_planted=len(planted),
        n_selected=len(selected),
    )
