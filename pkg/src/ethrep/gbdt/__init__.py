"""Histogram gradient-boosted trees for binary classification."""

from ethrep.gbdt.binning import BinMapper, build_bin_mapper
from ethrep.gbdt.bundling import FeatureBundle, build_bundles, encode_bundles
from ethrep.gbdt.goss import DegenerateRate, goss_sample
from ethrep.gbdt.model import (
    CorruptFile,
    DimensionMismatch,
    EmptyDataset,
    FeatureImportance,
    GbdtConfig,
    GbdtModel,
    ImportanceKind,
    SingleClass,
    VersionMismatch,
    feature_importance,
    load_model,
    log_loss,
    predict_proba,
    save_model,
    train,
)
from ethrep.gbdt.tree import Tree

__all__ = [
    "BinMapper", "build_bin_mapper", "FeatureBundle", "build_bundles", "encode_bundles",
    "DegenerateRate", "goss_sample", "CorruptFile", "DimensionMismatch", "EmptyDataset",
    "FeatureImportance", "GbdtConfig", "GbdtModel", "ImportanceKind", "SingleClass",
    "VersionMismatch", "feature_importance", "load_model", "log_loss", "predict_proba",
    "save_model", "train", "Tree",
]
