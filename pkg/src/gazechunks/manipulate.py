"""Chunk-level latent-code editing.

Replacing the selected (gaze-relevant) chunks of one code with those of a
donor transports the donor's gaze while leaving every unmasked element
bit-identical to the base.  The donor can be another sample or a group
mean code.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .analysis import SelectionMask
from .core import ConfigError, InsufficientDataError, LatentCode, LatentDataset, LayoutError

DonorPolicy = Literal["from_code", "from_group_mean"]


@dataclass(frozen=True)
class ManipulationRecipe:
    mask: SelectionMask
    donor_policy: DonorPolicy = "from_code"


def replace_chunks(base: LatentCode, donor: LatentCode, mask: SelectionMask) -> LatentCode:
    """New code taking masked chunks from the donor, everything else from the base."""
    if base.layout != donor.layout or base.layout != mask.layout:
        raise LayoutError("base, donor, and mask must share one layout")
    out = base.values.copy()
    idx = mask.element_indices()
    out[idx] = donor.values[idx]
    return LatentCode(base.layout, out)


def replace_chunks_batch(
    base: np.ndarray, donor: np.ndarray, mask: SelectionMask
) -> np.ndarray:
    """Row-wise replace_chunks over aligned (n, total_dims) matrices.

    ``donor`` may also be a single (total_dims,) vector donated to every row.
    """
    base = np.asarray(base, dtype=np.float64)
    if base.ndim != 2 or base.shape[1] != mask.layout.total_dims:
        raise LayoutError("base matrix does not match the mask layout")
    donor = np.asarray(donor, dtype=np.float64)
    out = base.copy()
    idx = mask.element_indices()
    if donor.ndim == 1:
        out[:, idx] = donor[idx]
    else:
        if donor.shape != base.shape:
            raise LayoutError("donor matrix must match the base shape")
        out[:, idx] = donor[:, idx]
    return out


def group_mean_code(dataset: LatentDataset, group: np.ndarray) -> LatentCode:
    """Elementwise mean code over the given sample indices."""
    group = np.asarray(group, dtype=np.intp)
    if group.size == 0:
        raise InsufficientDataError("group_mean_code needs a nonempty group")
    return LatentCode(dataset.layout, dataset.codes[group].mean(axis=0))


def apply_recipe(
    base: LatentCode,
    recipe: ManipulationRecipe,
    donor: LatentCode | None = None,
    dataset: LatentDataset | None = None,
    group: np.ndarray | None = None,
) -> LatentCode:
    """Resolve the donor per the recipe's policy, then replace chunks."""
    if recipe.donor_policy == "from_code":
        if donor is None:
            raise ConfigError("from_code policy requires a donor code")
        resolved = donor
    elif recipe.donor_policy == "from_group_mean":
        if dataset is None or group is None:
            raise ConfigError("from_group_mean policy requires a dataset and group")
        resolved = group_mean_code(dataset, group)
    else:
        raise ConfigError(f"unknown donor policy {recipe.donor_policy!r}")
    return replace_chunks(base, resolved, recipe.mask)
