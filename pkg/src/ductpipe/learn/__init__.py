from .forest import Forest, ForestParams, Tree, balanced_sample, predict, predict_proba, train_forest
from .metrics import MetricsReport, RepeatedMetrics, compute_metrics, confusion_matrix
from .pca import PcaModel, pca_fit, pca_inverse_transform, pca_transform
from .protocols import (
    BINARY_TASKS,
    LearnConfig,
    SavedModel,
    SplitEvalReport,
    TaskSpec,
    fit_fold_model,
    load_model,
    run_loocv,
    run_split_eval,
    save_model,
)

__all__ = [
    "Forest",
    "ForestParams",
    "Tree",
    "balanced_sample",
    "predict",
    "predict_proba",
    "train_forest",
    "MetricsReport",
    "RepeatedMetrics",
    "compute_metrics",
    "confusion_matrix",
    "PcaModel",
    "pca_fit",
    "pca_transform",
    "pca_inverse_transform",
    "BINARY_TASKS",
    "LearnConfig",
    "SavedModel",
    "SplitEvalReport",
    "TaskSpec",
    "fit_fold_model",
    "run_loocv",
    "run_split_eval",
    "save_model",
    "load_model",
]
