"""Logistic-loss gradient boosting with GOSS and EFB."""

from __future__ import annotations

import dataclasses
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np
from scipy.special import expit

from ethrep.gbdt.binning import BinMapper, build_bin_mapper
from ethrep.gbdt.bundling import build_bundles, encode_bundles, singleton_bundles
from ethrep.gbdt.goss import goss_sample, iteration_rng
from ethrep.gbdt.tree import HistogramBuilder, Tree, grow_tree

FORMAT_VERSION = 1


class GbdtError(Exception):
    pass


class SingleClass(GbdtError):
    pass


class EmptyDataset(GbdtError):
    pass


class DimensionMismatch(GbdtError, ValueError):
    pass


class VersionMismatch(GbdtError):
    pass


class CorruptFile(GbdtError):
    pass


@dataclass(frozen=True)
class GbdtConfig:
    learning_rate: float = 0.1
    n_estimators: int = 100
    max_depth: Optional[int] = 2  # None = unlimited
    max_bins: int = 255
    min_data_in_leaf: int = 20
    lambda_l2: float = 0.0
    goss_top_rate: float = 0.2
    goss_other_rate: float = 0.1
    goss_enabled: bool = True
    efb_max_conflict_rate: float = 0.0
    efb_enabled: bool = True
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be positive")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be positive or None")
        if not 2 <= self.max_bins <= 255:
            raise ValueError("max_bins must be in [2, 255]")
        if self.min_data_in_leaf < 0:
            raise ValueError("min_data_in_leaf must be non-negative")
        if self.lambda_l2 < 0:
            raise ValueError("lambda_l2 must be non-negative")
        if not 0 < self.goss_top_rate <= 1:
            raise ValueError("goss_top_rate must be in (0, 1]")
        if not 0 <= self.goss_other_rate < 1:
            raise ValueError("goss_other_rate must be in [0, 1)")
        if self.goss_top_rate + self.goss_other_rate > 1 + 1e-12:
            raise ValueError("goss_top_rate + goss_other_rate must not exceed 1")
        if not 0 <= self.efb_max_conflict_rate < 1:
            raise ValueError("efb_max_conflict_rate must be in [0, 1)")
        if not -(2**63) <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")

    @property
    def uses_goss(self) -> bool:
        return self.goss_enabled and self.goss_top_rate < 1.0

    def effective(self) -> "GbdtConfig":
        """Canonical form: any configuration that trains on full data records GOSS as off."""
        if self.uses_goss:
            return self
        return dataclasses.replace(self, goss_enabled=False, goss_top_rate=1.0, goss_other_rate=0.0)

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> "GbdtConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**doc)


@dataclass(frozen=True, eq=False)
class GbdtModel:
    trees: tuple[Tree, ...]
    init_score: float
    config: GbdtConfig
    bin_mapper: BinMapper
    feature_names: tuple[str, ...]
    format_version: int = FORMAT_VERSION
    # training log-loss after each iteration; not persisted
    train_loss: tuple[float, ...] = field(default=(), compare=False)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def _check(self, X) -> np.ndarray:
        X = np.asarray(getattr(X, "X", X), dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got shape {X.shape}")
        return X

    def raw_score(self, X, n_trees: Optional[int] = None) -> np.ndarray:
        X = self._check(X)
        score = np.full(X.shape[0], self.init_score)
        lr = self.config.learning_rate
        for tree in self.trees[:n_trees]:
            score += lr * tree.predict(X)
        return score

    def staged_raw_score(self, X) -> Iterator[np.ndarray]:
        """Raw score after 1, 2, ..., len(trees) trees."""
        X = self._check(X)
        score = np.full(X.shape[0], self.init_score)
        lr = self.config.learning_rate
        for tree in self.trees:
            score = score + lr * tree.predict(X)
            yield score

    def predict_proba(self, X, n_trees: Optional[int] = None) -> np.ndarray:
        return expit(self.raw_score(X, n_trees))

    def truncated(self, n_trees: int) -> "GbdtModel":
        """The model as it stood after ``n_trees`` iterations."""
        cfg = dataclasses.replace(self.config, n_estimators=n_trees)
        return dataclasses.replace(self, trees=self.trees[:n_trees], config=cfg,
                                   train_loss=self.train_loss[:n_trees])


def predict_proba(model: GbdtModel, row) -> float:
    """Illicit-class probability of a single feature vector."""
    features = getattr(row, "features", row)
    return float(model.predict_proba(np.asarray(features, dtype=np.float64)[None, :])[0])


def log_loss(y: np.ndarray, p: np.ndarray, eps: float = 1e-15) -> float:
    p = np.clip(p, eps, 1 - eps)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log1p(-p)))


def gradients(y: np.ndarray, score: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """First and second derivatives of the logistic loss w.r.t. the raw score."""
    p = expit(score)
    return p - y, p * (1.0 - p)


def train(dataset, config: GbdtConfig = GbdtConfig(), *, y=None,
          feature_names: Optional[Sequence[str]] = None) -> GbdtModel:
    """Fit a boosted ensemble.

    ``dataset`` is a Dataset or a raw feature matrix (then pass ``y``).
    """
    if y is None:
        X, y = dataset.X, dataset.y
        feature_names = feature_names or dataset.feature_names
    else:
        X = dataset
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDataset("training needs at least one row")
    if feature_names is None:
        feature_names = tuple(f"f{j}" for j in range(X.shape[1]))
    n_pos = int(np.count_nonzero(y == 1))
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("both classes must be present")
    cfg = config.effective()

    bin_mapper = build_bin_mapper(X, cfg.max_bins)
    binned = bin_mapper.transform(X)
    if cfg.efb_enabled:
        bundles = build_bundles(binned, bin_mapper, cfg.efb_max_conflict_rate)
    else:
        bundles = singleton_bundles(bin_mapper)
    builder = HistogramBuilder(encode_bundles(binned, bundles), bundles,
                               bin_mapper.n_bins, bin_mapper.default_bins)

    init_score = math.log(n_pos / n_neg)
    score = np.full(len(y), init_score)
    all_rows = np.arange(len(y))
    trees, losses = [], []
    for it in range(cfg.n_estimators):
        g, h = gradients(y, score)
        rows = all_rows
        if cfg.uses_goss:
            rows, w = goss_sample(g, cfg.goss_top_rate, cfg.goss_other_rate,
                                  iteration_rng(cfg.seed, it))
            if not np.all(w == 1.0):
                g, h = g.copy(), h.copy()
                g[rows] *= w
                h[rows] *= w
        tree = grow_tree(builder, binned, rows, g, h, bin_mapper.boundaries,
                         max_depth=cfg.max_depth, lambda_l2=cfg.lambda_l2,
                         min_data_in_leaf=cfg.min_data_in_leaf)
        trees.append(tree)
        score = score + cfg.learning_rate * tree.predict_binned(binned)
        losses.append(log_loss(y, expit(score)))
    return GbdtModel(tuple(trees), init_score, cfg, bin_mapper, tuple(feature_names),
                     train_loss=tuple(losses))


# ------------------------------------------------------------- importance

class ImportanceKind(str, enum.Enum):
    SPLIT = "split"
    GAIN = "gain"


@dataclass(frozen=True)
class FeatureImportance:
    feature_names: tuple[str, ...]
    split_count: tuple[int, ...]
    total_gain: tuple[float, ...]

    def ranking(self, kind: ImportanceKind | str = ImportanceKind.SPLIT) -> list[tuple[str, float]]:
        """Descending by the chosen measure; ties keep catalog order."""
        kind = ImportanceKind(kind)
        vals = self.split_count if kind is ImportanceKind.SPLIT else self.total_gain
        order = sorted(range(len(vals)), key=lambda j: (-vals[j], j))
        return [(self.feature_names[j], vals[j]) for j in order]


def feature_importance(model: GbdtModel | Sequence[GbdtModel]) -> FeatureImportance:
    """Split counts and summed split gains; a list of models is pooled."""
    models = [model] if isinstance(model, GbdtModel) else list(model)
    n = models[0].n_features
    counts = np.zeros(n, dtype=np.int64)
    gains = np.zeros(n)
    for m in models:
        for tree in m.trees:
            internal = tree.feature >= 0
            np.add.at(counts, tree.feature[internal], 1)
            np.add.at(gains, tree.feature[internal], tree.gain[internal])
    return FeatureImportance(models[0].feature_names, tuple(int(c) for c in counts),
                             tuple(float(v) for v in gains))


# ------------------------------------------------------------ persistence

def model_to_json(model: GbdtModel) -> str:
    doc = {
        "format_version": model.format_version,
        "feature_names": list(model.feature_names),
        "config": model.config.to_json(),
        "init_score": model.init_score,
        "bin_boundaries": model.bin_mapper.to_json(),
        "trees": [t.to_json() for t in model.trees],
    }
    return json.dumps(doc, indent=1) + "\n"


def model_from_json(text: str) -> GbdtModel:
    try:
        doc = json.loads(text)
    except ValueError as exc:
        raise CorruptFile(f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise CorruptFile("missing format_version")
    if doc["format_version"] != FORMAT_VERSION:
        raise VersionMismatch(f"file version {doc['format_version']}, expected {FORMAT_VERSION}")
    try:
        names = tuple(doc["feature_names"])
        mapper = BinMapper.from_json(doc["bin_boundaries"])
        trees = tuple(Tree.from_json(t) for t in doc["trees"])
        model = GbdtModel(trees, float(doc["init_score"]), GbdtConfig.from_json(doc["config"]),
                          mapper, names)
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptFile(f"malformed model: {exc}") from None
    if mapper.n_features != len(names):
        raise CorruptFile("bin boundaries do not match feature count")
    return model


def save_model(model: GbdtModel, path) -> None:
    Path(path).write_text(model_to_json(model), encoding="utf-8")


def load_model(path) -> GbdtModel:
    return model_from_json(Path(path).read_text(encoding="utf-8"))
