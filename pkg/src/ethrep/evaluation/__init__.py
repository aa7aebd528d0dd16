"""Metrics, cross-validation, grid search and report writers."""

from ethrep.evaluation.cv import (
    CvResult,
    GridCell,
    GridSearchResult,
    TooFewRows,
    cross_validate,
    grid_search,
    stratified_kfold,
)
from ethrep.evaluation.metrics import (
    ClassificationReport,
    ConfusionMatrix,
    UndefinedMetric,
    accuracy,
    classification_report,
    mann_whitney_auc,
    roc_auc,
    roc_curve,
    sensitivity,
    specificity,
)

__all__ = [
    "CvResult", "GridCell", "GridSearchResult", "TooFewRows", "cross_validate", "grid_search",
    "stratified_kfold", "ClassificationReport", "ConfusionMatrix", "UndefinedMetric", "accuracy",
    "classification_report", "mann_whitney_auc", "roc_auc", "roc_curve", "sensitivity",
    "specificity",
]
