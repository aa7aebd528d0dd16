"""Exclusive feature bundling over binned features."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ethrep.gbdt.binning import BinMapper


@dataclass(frozen=True)
class FeatureBundle:
    """Several features sharing one histogram column.

    Slot 0 means every member sits in its default (zero) bin. Member ``m`` owns
    slots ``offsets[m] .. offsets[m] + n_bins[m] - 2``, one per non-default bin.
    """

    features: tuple[int, ...]
    offsets: tuple[int, ...]
    n_bins: tuple[int, ...]
    default_bins: tuple[int, ...]

    @property
    def n_slots(self) -> int:
        if not self.features:
            return 1
        return self.offsets[-1] + self.n_bins[-1] - 1

    def encode(self, member: int, bin_: int) -> int:
        d = self.default_bins[member]
        if bin_ == d:
            return 0
        return self.offsets[member] + (bin_ if bin_ < d else bin_ - 1)

    def decode(self, slot: int) -> Optional[tuple[int, int]]:
        """(feature index, bin) for a slot, or None for the all-default slot."""
        if slot == 0:
            return None
        for m in range(len(self.features) - 1, -1, -1):
            if slot >= self.offsets[m]:
                r = slot - self.offsets[m]
                if r >= self.n_bins[m] - 1:
                    break
                d = self.default_bins[m]
                return self.features[m], (r if r < d else r + 1)
        raise ValueError(f"slot {slot} out of range")


def _make_bundle(members, n_bins, default_bins) -> FeatureBundle:
    members = sorted(members)
    offsets, off = [], 1
    for f in members:
        offsets.append(off)
        off += int(n_bins[f]) - 1
    return FeatureBundle(tuple(members), tuple(offsets),
                         tuple(int(n_bins[f]) for f in members),
                         tuple(int(default_bins[f]) for f in members))


def singleton_bundles(bin_mapper: BinMapper) -> list[FeatureBundle]:
    n_bins, default = bin_mapper.n_bins, bin_mapper.default_bins
    return [_make_bundle([f], n_bins, default) for f in range(bin_mapper.n_features)]


def build_bundles(binned: np.ndarray, bin_mapper: BinMapper,
                  max_conflict_rate: float = 0.0) -> list[FeatureBundle]:
    """Greedy conflict-bounded bundling.

    Features are visited by descending non-default count (ties by index) and
    placed in the first bundle whose accumulated conflict count stays within
    ``floor(max_conflict_rate * n_rows)``.
    """
    if not 0.0 <= max_conflict_rate < 1.0:
        raise ValueError("max_conflict_rate must be in [0, 1)")
    n_bins, default = bin_mapper.n_bins, bin_mapper.default_bins
    nonzero = binned != default[None, :].astype(binned.dtype)
    n_rows = binned.shape[0]
    budget = math.floor(max_conflict_rate * n_rows + 1e-9)

    counts = nonzero.sum(axis=0)
    order = sorted(range(binned.shape[1]), key=lambda f: (-counts[f], f))
    groups: list[list[int]] = []
    masks: list[np.ndarray] = []
    conflicts: list[int] = []
    for f in order:
        for k, mask in enumerate(masks):
            c = int(np.count_nonzero(mask & nonzero[:, f]))
            if conflicts[k] + c <= budget:
                groups[k].append(f)
                masks[k] = mask | nonzero[:, f]
                conflicts[k] += c
                break
        else:
            groups.append([f])
            masks.append(nonzero[:, f].copy())
            conflicts.append(0)
    bundles = [_make_bundle(g, n_bins, default) for g in groups]
    bundles.sort(key=lambda b: b.features[0])
    return bundles


def encode_bundles(binned: np.ndarray, bundles: list[FeatureBundle]) -> np.ndarray:
    """Map a binned matrix to one slot column per bundle.

    On conflicting rows the lowest-index non-default member wins.
    """
    out = np.zeros((binned.shape[0], len(bundles)), dtype=np.int32)
    for k, b in enumerate(bundles):
        col = out[:, k]
        for m in range(len(b.features) - 1, -1, -1):
            bins = binned[:, b.features[m]].astype(np.int32)
            d = b.default_bins[m]
            hit = bins != d
            col[hit] = b.offsets[m] + np.where(bins[hit] < d, bins[hit], bins[hit] - 1)
    return out
