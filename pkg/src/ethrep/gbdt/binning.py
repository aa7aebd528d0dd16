"""Quantile binning of raw feature values into at most 255 histogram bins."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_BINS_LIMIT = 255


def _midpoint(a: float, b: float) -> float:
    """A threshold t with a <= t < b, for a < b."""
    mid = a / 2.0 + b / 2.0
    if not (a <= mid < b):
        mid = a
    return mid


def _feature_boundaries(values: np.ndarray, max_bins: int) -> np.ndarray:
    distinct = np.unique(values)
    if len(distinct) <= max_bins:
        return np.array([_midpoint(a, b) for a, b in zip(distinct[:-1], distinct[1:])],
                        dtype=np.float64)
    v = np.sort(values)
    n = len(v)
    cuts = []
    for j in range(1, max_bins):
        c = (j * n + max_bins // 2) // max_bins
        if c <= 0 or c >= n:
            continue
        if v[c - 1] == v[c]:
            # a run of equal values straddles the cut: move it past the run
            c = int(np.searchsorted(v, v[c], side="right"))
            if c >= n:
                continue
        cuts.append(_midpoint(v[c - 1], v[c]))
    return np.unique(np.array(cuts, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class BinMapper:
    """Per-feature ascending bin upper boundaries.

    A value v lands in bin ``#{t in boundaries : t < v}``, so bin <= k exactly
    when v <= boundaries[k].
    """

    boundaries: tuple[np.ndarray, ...]

    @property
    def n_features(self) -> int:
        return len(self.boundaries)

    @property
    def n_bins(self) -> np.ndarray:
        return np.array([len(b) + 1 for b in self.boundaries], dtype=np.int64)

    @property
    def default_bins(self) -> np.ndarray:
        """Bin holding the raw value 0.0 for each feature."""
        return np.array([np.searchsorted(b, 0.0, side="left") for b in self.boundaries],
                        dtype=np.int64)

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected (n, {self.n_features}) matrix, got {X.shape}")
        out = np.empty(X.shape, dtype=np.uint8)
        for j, b in enumerate(self.boundaries):
            out[:, j] = np.searchsorted(b, X[:, j], side="left")
        return out

    def __eq__(self, other):
        return (isinstance(other, BinMapper) and self.n_features == other.n_features
                and all(np.array_equal(a, b) for a, b in zip(self.boundaries, other.boundaries)))

    def to_json(self) -> list[list[float]]:
        return [[float(t) for t in b] for b in self.boundaries]

    @classmethod
    def from_json(cls, doc) -> "BinMapper":
        bounds = []
        for b in doc:
            arr = np.array(b, dtype=np.float64)
            if arr.ndim != 1 or np.any(np.diff(arr) <= 0) or len(arr) > MAX_BINS_LIMIT - 1:
                raise ValueError("bin boundaries must be strictly increasing, at most 254")
            bounds.append(arr)
        return cls(tuple(bounds))


def build_bin_mapper(X, max_bins: int = MAX_BINS_LIMIT) -> BinMapper:
    """Choose boundaries at value quantiles so bins are near-equally populated.

    A feature with k <= max_bins distinct values gets exactly k bins, split at
    midpoints between consecutive distinct values.
    """
    if not 2 <= max_bins <= MAX_BINS_LIMIT:
        raise ValueError(f"max_bins must be in [2, {MAX_BINS_LIMIT}]")
    X = getattr(X, "X", X)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("need a non-empty 2-d feature matrix")
    return BinMapper(tuple(_feature_boundaries(X[:, j], max_bins) for j in range(X.shape[1])))
