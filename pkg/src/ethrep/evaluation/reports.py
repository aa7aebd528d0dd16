"""CSV and text renderings of evaluation results."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ethrep.evaluation.cv import CvResult, GridSearchResult
from ethrep.evaluation.metrics import (
    ClassificationReport,
    ConfusionMatrix,
    UndefinedMetric,
    accuracy,
    classification_report,
    roc_auc,
    sensitivity,
    specificity,
)

MISCLASSIFIED_COLUMNS = ("address", "true_flag", "predicted_flag", "probability", "fold")
OOF_COLUMNS = ("address", "true_flag", "fold", "probability")


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_grid_csv(result: GridSearchResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["learning_rate", "n_estimators", "max_depth", "mean_auc", "std_auc",
                    "mean_accuracy", "best"])
        best = result.best
        for c in result.cells:
            w.writerow([_num(c.learning_rate), c.n_estimators, _num(c.max_depth),
                        _num(c.mean_auc), _num(c.std_auc), _num(c.mean_accuracy), int(c == best)])


def write_curves_csv(result: CvResult, path) -> None:
    ll, err = result.mean_log_loss_curve, result.mean_error_curve
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["iteration", "mean_log_loss", "mean_error"])
        for i, (a, b) in enumerate(zip(ll, err), start=1):
            w.writerow([i, _num(a), _num(b)])


def write_folds_csv(result: CvResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["fold", "n_test", "auc", "accuracy", "tp", "tn", "fp", "fn"])
        for f in result.folds:
            cm = f.confusion
            w.writerow([f.index, len(f.test_rows), _num(f.auc), _num(f.accuracy),
                        cm.tp, cm.tn, cm.fp, cm.fn])


def write_misclassified_csv(result: CvResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(MISCLASSIFIED_COLUMNS)
        for m in result.misclassified:
            w.writerow([m.address, int(m.true_flag), int(m.predicted_flag),
                        _num(m.probability), m.fold])


def write_oof_csv(result: CvResult, path) -> None:
    p, fold = result.oof_probabilities, result.oof_fold
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(OOF_COLUMNS)
        for a, y, f, q in zip(result.addresses, result.labels, fold, p):
            w.writerow([a, int(y), int(f), _num(q)])


def write_roc_csv(scores, labels, path) -> float:
    auc, points = roc_auc(scores, labels)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["threshold", "fpr", "tpr"])
        for t, fpr, tpr in points:
            w.writerow([_num(t), _num(fpr), _num(tpr)])
    return auc


def read_oof_csv(path):
    """(true labels, fold ids, probabilities) from an out-of-fold predictions file."""
    ys, folds, ps = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            ys.append(int(rec["true_flag"]))
            folds.append(int(rec["fold"]))
            ps.append(float(rec["probability"]))
    return np.array(ys), np.array(folds), np.array(ps)


def _fmt_metric(fn, cm) -> str:
    try:
        return f"{fn(cm):.4f}"
    except UndefinedMetric:
        return "undefined"


def summary_text(cm: ConfusionMatrix, fold_aucs, fold_accs, pooled_auc: float) -> str:
    """Cross-validation summary: both mean-of-folds and pooled quantities."""
    aucs = np.asarray(fold_aucs)
    accs = np.asarray(fold_accs)
    sd = lambda a: float(np.std(a, ddof=1)) if len(a) > 1 else 0.0  # noqa: E731
    lines = [
        f"folds: {len(aucs)}",
        f"mean fold AUC: {aucs.mean():.4f} (+/- {sd(aucs):.4f})",
        f"mean fold accuracy: {accs.mean():.4f} (+/- {sd(accs):.4f})",
        f"pooled out-of-fold AUC: {pooled_auc:.4f}",
        f"pooled out-of-fold accuracy: {_fmt_metric(accuracy, cm)}",
        f"sensitivity (illicit recall): {_fmt_metric(sensitivity, cm)}",
        f"specificity: {_fmt_metric(specificity, cm)}",
        f"confusion: tp={cm.tp} tn={cm.tn} fp={cm.fp} fn={cm.fn}",
    ]
    return "\n".join(lines) + "\n"


def report_from_oof(path, threshold: float = 0.5) -> tuple[ClassificationReport, str]:
    """Classification report text rebuilt from an out-of-fold predictions file."""
    y, folds, p = read_oof_csv(path)
    cm = ConfusionMatrix.from_predictions(y, p >= threshold)
    report = classification_report(cm)
    aucs, accs = [], []
    for f in np.unique(folds):
        sel = folds == f
        aucs.append(roc_auc(p[sel], y[sel])[0])
        accs.append(accuracy(ConfusionMatrix.from_predictions(y[sel], p[sel] >= threshold)))
    pooled_auc, _ = roc_auc(p, y)
    return report, report.to_text() + "\n" + summary_text(cm, aucs, accs, pooled_auc)
