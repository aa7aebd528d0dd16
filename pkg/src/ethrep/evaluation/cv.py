"""Stratified k-fold cross-validation and grid search over boosting parameters."""

from __future__ import annotations

import dataclasses
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from ethrep.dataset import Address, Dataset, Flag
from ethrep.evaluation.metrics import ConfusionMatrix, accuracy, roc_auc
from ethrep.gbdt.model import GbdtConfig, GbdtModel, log_loss, train


class TooFewRows(ValueError):
    pass


def stratified_kfold(labels, k: int, seed: int, stratified: bool = True) -> list[tuple[np.ndarray, np.ndarray]]:
    """Partition row indices into k (train, test) pairs.

    Each class is shuffled, classes are laid end to end, and position i goes to
    fold i mod k. Fold sizes differ by at most one, and so does every fold's
    per-class count.
    """
    y = np.asarray(getattr(labels, "y", labels))
    if k < 2:
        raise TooFewRows("k must be at least 2")
    rng = np.random.default_rng(np.random.SeedSequence([seed & (2**64 - 1), 0x6B666F6C64]))
    if stratified:
        classes = np.unique(y)
        sequence = []
        for c in classes:
            members = np.flatnonzero(y == c)
            if len(members) < k:
                raise TooFewRows(f"class {c!r} has {len(members)} rows, fewer than k={k}")
            sequence.append(rng.permutation(members))
        order = np.concatenate(sequence) if sequence else np.array([], dtype=np.int64)
    else:
        if len(y) < k:
            raise TooFewRows(f"{len(y)} rows, fewer than k={k}")
        order = rng.permutation(len(y))
    fold_of = np.empty(len(y), dtype=np.int64)
    fold_of[order] = np.arange(len(order)) % k
    all_rows = np.arange(len(y))
    return [(all_rows[fold_of != i], all_rows[fold_of == i]) for i in range(k)]


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    std = float(np.std(arr, ddof=1)) if len(arr) > 1 else 0.0
    return float(np.mean(arr)), std


@dataclass(frozen=True)
class Misclassification:
    address: Address
    true_flag: Flag
    predicted_flag: Flag
    probability: float
    fold: int


@dataclass
class FoldResult:
    index: int
    train_rows: np.ndarray
    test_rows: np.ndarray
    probabilities: np.ndarray
    auc: float
    accuracy: float
    confusion: ConfusionMatrix
    log_loss_curve: np.ndarray
    error_curve: np.ndarray
    model: GbdtModel


@dataclass
class CvResult:
    k: int
    seed: int
    config: GbdtConfig
    threshold: float
    folds: list[FoldResult]
    addresses: list[Address]
    labels: np.ndarray

    @property
    def fold_auc(self) -> list[float]:
        return [f.auc for f in self.folds]

    @property
    def fold_accuracy(self) -> list[float]:
        return [f.accuracy for f in self.folds]

    @property
    def auc_mean_std(self) -> tuple[float, float]:
        return _mean_std(self.fold_auc)

    @property
    def accuracy_mean_std(self) -> tuple[float, float]:
        return _mean_std(self.fold_accuracy)

    @property
    def confusion(self) -> ConfusionMatrix:
        """Pooled over all out-of-fold predictions."""
        total = ConfusionMatrix(0, 0, 0, 0)
        for f in self.folds:
            total = total + f.confusion
        return total

    @property
    def pooled_accuracy(self) -> float:
        return accuracy(self.confusion)

    @property
    def mean_log_loss_curve(self) -> np.ndarray:
        return np.mean([f.log_loss_curve for f in self.folds], axis=0)

    @property
    def mean_error_curve(self) -> np.ndarray:
        return np.mean([f.error_curve for f in self.folds], axis=0)

    @property
    def oof_probabilities(self) -> np.ndarray:
        p = np.empty(len(self.labels))
        for f in self.folds:
            p[f.test_rows] = f.probabilities
        return p

    @property
    def oof_fold(self) -> np.ndarray:
        fold = np.empty(len(self.labels), dtype=np.int64)
        for f in self.folds:
            fold[f.test_rows] = f.index
        return fold

    @property
    def misclassified(self) -> list[Misclassification]:
        out = []
        for f in self.folds:
            for row, p in zip(f.test_rows, f.probabilities):
                pred = int(p >= self.threshold)
                true = int(self.labels[row])
                if pred != true:
                    out.append(Misclassification(self.addresses[row], Flag(true), Flag(pred),
                                                 float(p), f.index))
        return out


def _staged_curves(model: GbdtModel, X: np.ndarray, y: np.ndarray, threshold: float):
    losses, errors = [], []
    for score in model.staged_raw_score(X):
        p = expit(score)
        losses.append(log_loss(y, p))
        errors.append(float(np.mean((p >= threshold) != (y == 1))))
    return np.array(losses), np.array(errors)


def _map(fn, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))  # map preserves input order


def cross_validate(dataset: Dataset, config: GbdtConfig, k: int = 10, seed: int = 0, *,
                   threshold: float = 0.5, stratified: bool = True, threads: int = 1) -> CvResult:
    X, y = dataset.X, dataset.y
    folds = stratified_kfold(y, k, seed, stratified)

    def run(item):
        i, (tr, te) = item
        model = train(X[tr], config, y=y[tr], feature_names=dataset.feature_names)
        p = model.predict_proba(X[te])
        auc, _ = roc_auc(p, y[te])
        cm = ConfusionMatrix.from_predictions(y[te], p >= threshold)
        ll, err = _staged_curves(model, X[te], y[te], threshold)
        return FoldResult(i, tr, te, p, auc, accuracy(cm), cm, ll, err, model)

    results = _map(run, enumerate(folds), threads)
    return CvResult(k, seed, config.effective(), threshold, results, dataset.addresses, y)


@dataclass(frozen=True)
class GridCell:
    learning_rate: float
    n_estimators: int
    max_depth: Optional[int]
    mean_auc: float
    std_auc: float
    mean_accuracy: float

    def tie_key(self):
        depth = math.inf if self.max_depth is None else self.max_depth
        return (-self.mean_auc, self.n_estimators, depth, self.learning_rate)


@dataclass
class GridSearchResult:
    cells: list[GridCell]
    k: int
    seed: int

    @property
    def best(self) -> GridCell:
        """Highest mean AUC; ties go to fewer estimators, then smaller depth, then smaller rate."""
        return min(self.cells, key=GridCell.tie_key)


def grid_search(dataset: Dataset, learning_rates: Sequence[float], n_estimators: Sequence[int],
                max_depths: Sequence[Optional[int]], k: int = 10, seed: int = 0, *,
                base_config: GbdtConfig = GbdtConfig(), threshold: float = 0.5,
                stratified: bool = True, threads: int = 1) -> GridSearchResult:
    """Mean k-fold AUC for every (learning_rate, n_estimators, max_depth) cell.

    Training never looks at n_estimators except to stop, so each
    (rate, depth, fold) is trained once with the largest estimator count and
    scored at every smaller count along the way.
    """
    if not (learning_rates and n_estimators and max_depths):
        raise ValueError("every grid axis needs at least one value")
    X, y = dataset.X, dataset.y
    folds = stratified_kfold(y, k, seed, stratified)
    n_grid = sorted(set(int(n) for n in n_estimators))
    n_max = n_grid[-1]

    jobs = list(itertools.product(learning_rates, max_depths, range(k)))

    def run(job):
        lr, depth, i = job
        tr, te = folds[i]
        cfg = dataclasses.replace(base_config, learning_rate=lr, max_depth=depth, n_estimators=n_max)
        model = train(X[tr], cfg, y=y[tr], feature_names=dataset.feature_names)
        out = {}
        for it, score in enumerate(model.staged_raw_score(X[te]), start=1):
            if it in n_grid:
                p = expit(score)
                auc, _ = roc_auc(p, y[te])
                cm = ConfusionMatrix.from_predictions(y[te], p >= threshold)
                out[it] = (auc, accuracy(cm))
        return out

    scores = _map(run, jobs, threads)
    by_job = dict(zip(jobs, scores))
    cells = []
    for lr in learning_rates:
        for n in n_estimators:
            for depth in max_depths:
                aucs = [by_job[(lr, depth, i)][n][0] for i in range(k)]
                accs = [by_job[(lr, depth, i)][n][1] for i in range(k)]
                m, s = _mean_std(aucs)
                cells.append(GridCell(lr, int(n), depth, m, s, float(np.mean(accs))))
    return GridSearchResult(cells, k, seed)
