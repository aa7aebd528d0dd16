"""Confusion-matrix metrics, ROC/AUC and classification reports."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata


class UndefinedMetric(ArithmeticError):
    """A metric whose denominator is zero."""


class SingleClass(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    """Binary counts with Illicit (1) as the positive class."""

    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("counts must be non-negative")

    @property
    def n(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.tn + other.tn,
                               self.fp + other.fp, self.fn + other.fn)

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> "ConfusionMatrix":
        t = np.asarray(y_true).astype(bool)
        p = np.asarray(y_pred).astype(bool)
        return cls(int(np.sum(t & p)), int(np.sum(~t & ~p)),
                   int(np.sum(~t & p)), int(np.sum(t & ~p)))


def _ratio(num: int, den: int, name: str) -> float:
    if den == 0:
        raise UndefinedMetric(f"{name} is undefined (zero denominator)")
    return num / den


def accuracy(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tp + cm.tn, cm.tn + cm.fp + cm.fn + cm.tp, "accuracy")


def sensitivity(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tp, cm.fn + cm.tp, "sensitivity")


def specificity(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tn, cm.tn + cm.fp, "specificity")


def _check_binary(scores, labels):
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(int)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be equal-length vectors")
    n_pos = int(np.sum(y == 1))
    if n_pos == 0 or n_pos == len(y):
        raise SingleClass("AUC needs both classes")
    return s, y


def mann_whitney_auc(scores, labels) -> float:
    """P(score of a random positive > a random negative), ties counting one half."""
    s, y = _check_binary(scores, labels)
    ranks = rankdata(s)  # average ranks for ties
    n_pos = int(np.sum(y == 1))
    n_neg = len(y) - n_pos
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_curve(scores, labels) -> np.ndarray:
    """(threshold, fpr, tpr) rows sweeping the threshold from +inf downwards.

    A row with threshold t classifies ``score >= t`` as positive.
    """
    s, y = _check_binary(scores, labels)
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    # last index of every group of equal scores
    ends = np.r_[np.nonzero(np.diff(s))[0], len(s) - 1]
    tps = np.cumsum(y)[ends]
    fps = (ends + 1) - tps
    n_pos, n_neg = tps[-1], fps[-1]
    thresholds = np.r_[np.inf, s[ends]]
    return np.column_stack([thresholds, np.r_[0, fps] / n_neg, np.r_[0, tps] / n_pos])


def roc_auc(scores, labels) -> tuple[float, np.ndarray]:
    """Trapezoidal AUC over the threshold sweep, plus the sweep itself."""
    points = roc_curve(scores, labels)
    fpr, tpr = points[:, 1], points[:, 2]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return auc, points


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class ClassificationReport:
    likely_reputable: ClassScores
    illicit: ClassScores
    accuracy: float
    macro: ClassScores
    weighted: ClassScores

    @property
    def n(self) -> int:
        return self.likely_reputable.support + self.illicit.support

    def to_text(self, digits: int = 4) -> str:
        names = ["likely-reputable", "illicit"]
        width = max(len(x) for x in names + ["weighted avg"])
        head = f"{'':>{width}} {'precision':>10} {'recall':>10} {'f1-score':>10} {'support':>10}"
        fmt = f"{{:>{width}}} {{:>10.{digits}f}} {{:>10.{digits}f}} {{:>10.{digits}f}} {{:>10d}}"
        lines = [head, ""]
        for name, c in zip(names, (self.likely_reputable, self.illicit)):
            lines.append(fmt.format(name, c.precision, c.recall, c.f1, c.support))
        lines.append("")
        lines.append(f"{'accuracy':>{width}} {'':>10} {'':>10} {self.accuracy:>10.{digits}f} {self.n:>10d}")
        lines.append(fmt.format("macro avg", self.macro.precision, self.macro.recall,
                                self.macro.f1, self.macro.support))
        lines.append(fmt.format("weighted avg", self.weighted.precision, self.weighted.recall,
                                self.weighted.f1, self.weighted.support))
        return "\n".join(lines) + "\n"


def _safe(num: float, den: float) -> float:
    # per-class rows follow the usual zero_division=0 convention
    return num / den if den else 0.0


def _class_scores(tp: int, fp: int, fn: int) -> ClassScores:
    p = _safe(tp, tp + fp)
    r = _safe(tp, tp + fn)
    return ClassScores(p, r, _safe(2 * p * r, p + r), tp + fn)


def classification_report(cm: ConfusionMatrix) -> ClassificationReport:
    """Per-class precision/recall/f1 for both orientations plus averages."""
    neg = _class_scores(cm.tn, cm.fn, cm.fp)
    pos = _class_scores(cm.tp, cm.fp, cm.fn)
    n = neg.support + pos.support
    if neg.support == 0 or pos.support == 0:
        raise ValueError("classification report needs both classes in the support")

    def avg(weights):
        w0, w1 = weights
        tot = w0 + w1
        return ClassScores((w0 * neg.precision + w1 * pos.precision) / tot,
                           (w0 * neg.recall + w1 * pos.recall) / tot,
                           (w0 * neg.f1 + w1 * pos.f1) / tot, n)

    return ClassificationReport(neg, pos, accuracy(cm), avg((1, 1)),
                                avg((neg.support, pos.support)))
