"""Regression and classification of click positions from post-click hovers."""

from .features import EmptyCapture, LabeledSet, build_set, feature_names, featurize, truth_index
from .linear import LassoResult, lasso_fit, ols_fit
from .models import CLASSIFIERS, REGRESSORS, Model, ModelSpec, fit, model_from_json, model_to_json, parse_model_spec, predict
from .tree import TreeArrays, grow_tree
from .validation import (
    METRICS_COLUMNS,
    GroupTooSmall,
    Metrics,
    fold_indices,
    kfold_accuracy,
    kfold_predict,
    kfold_rmse,
    loocv_predict,
    loocv_rmse,
    metrics_csv,
    metrics_csv_row,
    per_user_eval,
)

__all__ = [
    "CLASSIFIERS", "METRICS_COLUMNS", "REGRESSORS", "EmptyCapture", "GroupTooSmall", "LabeledSet", "LassoResult", "Metrics",
    "Model", "ModelSpec", "TreeArrays", "build_set", "feature_names", "featurize", "fit", "fold_indices", "grow_tree",
    "kfold_accuracy", "kfold_predict", "kfold_rmse", "lasso_fit", "loocv_predict", "loocv_rmse", "metrics_csv", "metrics_csv_row",
    "model_from_json", "model_to_json", "ols_fit", "parse_model_spec", "per_user_eval", "predict", "truth_index",
]
