"""Evaluation protocols: leave-one-out binary tasks and the split-based
4-way task, each repeated over derived seeds, plus model (de)serialization.

PCA is applied inside every training fold exactly when the feature dimension
exceeds the number of training rows, reducing to 20 dimensions (capped by
the fold size). Nothing is ever fitted on held-out rows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..raster import DIAGNOSES
from .forest import Forest, ForestParams, predict_proba, train_forest
from .metrics import RepeatedMetrics, compute_metrics, confusion_matrix
from .pca import PcaModel, pca_fit, pca_transform

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TaskSpec:
    name: str
    positive: frozenset
    negative: frozenset

    def __post_init__(self):
        if self.positive & self.negative:
            raise ValueError(f"task {self.name}: positive and negative classes overlap")


BINARY_TASKS = {
    "invasive-vs-noninvasive": TaskSpec(
        "invasive-vs-noninvasive", frozenset({"Invasive"}), frozenset({"Benign", "Atypia", "DCIS"})
    ),
    "atypia-dcis-vs-benign": TaskSpec(
        "atypia-dcis-vs-benign", frozenset({"Atypia", "DCIS"}), frozenset({"Benign"})
    ),
    "dcis-vs-atypia": TaskSpec("dcis-vs-atypia", frozenset({"DCIS"}), frozenset({"Atypia"})),
}


@dataclass
class LearnConfig:
    forest: ForestParams = field(default_factory=ForestParams)
    pca_k: int = 20


def fit_fold_model(X_train, y_train, config: LearnConfig, seed: int, path: tuple):
    """Fit optional PCA + forest on training rows only.

    Returns (pca_or_none, forest). PCA triggers exactly when d > n_train.
    """
    X_train = np.asarray(X_train, dtype=float)
    n_train, d = X_train.shape
    pca = None
    if d > n_train:
        k = min(config.pca_k, n_train, d)
        pca = pca_fit(X_train, k)
        X_train = pca_transform(pca, X_train)
    forest = train_forest(X_train, y_train, config.forest, seed, path=path)
    return pca, forest


def _fold_predict(pca, forest, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if pca is not None:
        X = pca_transform(pca, X)
    proba = predict_proba(forest, X)
    return np.argmax(proba, axis=1)


def run_loocv(
    X: np.ndarray,
    diagnoses: list[str],
    task: TaskSpec,
    config: LearnConfig,
    repeats: int = 100,
    seed: int = 0,
) -> RepeatedMetrics:
    """Leave-one-out evaluation of one binary task; one confusion per repeat."""
    X = np.asarray(X, dtype=float)
    keep = [i for i, dx in enumerate(diagnoses) if dx in task.positive or dx in task.negative]
    if len(keep) < 2:
        raise ValueError(f"task {task.name}: fewer than 2 eligible ROIs")
    Xt = X[keep]
    y = np.array([1 if diagnoses[i] in task.positive else 0 for i in keep], dtype=np.int64)
    if len(np.unique(y)) < 2:
        raise ValueError(f"task {task.name}: only one class present")

    reports = []
    for r in range(repeats):
        y_pred = np.empty(len(keep), dtype=np.int64)
        for fold in range(len(keep)):
            train_rows = np.arange(len(keep)) != fold
            pca, forest = fit_fold_model(Xt[train_rows], y[train_rows], config, seed, (r, fold))
            y_pred[fold] = _fold_predict(pca, forest, Xt[fold : fold + 1])[0]
        conf = confusion_matrix(y, y_pred, 2)
        reports.append(compute_metrics(conf, positive_class=1))
    return RepeatedMetrics(reports)


@dataclass
class SplitEvalReport:
    classes: tuple
    accuracies: list[float]
    confusions: list[np.ndarray]
    chosen_n_trees: list[int]

    @property
    def accuracy_mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def accuracy_std(self) -> float:
        return float(np.std(self.accuracies))

    def as_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "accuracies": self.accuracies,
            "accuracy_mean": self.accuracy_mean,
            "accuracy_std": self.accuracy_std,
            "confusions": [c.tolist() for c in self.confusions],
            "chosen_n_trees": self.chosen_n_trees,
        }


def run_split_eval(
    X: np.ndarray,
    diagnoses: list[str],
    splits: list[str],
    config: LearnConfig,
    repeats: int = 10,
    seed: int = 0,
    tree_grid: list[int] | None = None,
) -> SplitEvalReport:
    """Train on the manifest train split, report 4-way accuracy on test.

    When tree_grid is given, the validation split picks the forest size
    (ties toward the smaller forest); otherwise validation rows are unused.
    """
    X = np.asarray(X, dtype=float)
    code = {dx: i for i, dx in enumerate(DIAGNOSES)}
    y = np.array([code[dx] for dx in diagnoses], dtype=np.int64)
    train = np.array([s == "train" for s in splits])
    val = np.array([s == "val" for s in splits])
    test = np.array([s == "test" for s in splits])
    if not train.any() or not test.any():
        raise ValueError("manifest must assign non-empty train and test splits")

    accuracies, confusions, chosen = [], [], []
    for r in range(repeats):
        params = config.forest
        if tree_grid:
            if not val.any():
                raise ValueError("tree_grid selection requires a validation split")
            best = None
            for gi, n_trees in enumerate(tree_grid):
                cand = LearnConfig(
                    forest=ForestParams(
                        n_trees=n_trees,
                        max_depth=params.max_depth,
                        min_leaf=params.min_leaf,
                        features_per_split=params.features_per_split,
                        bootstrap=params.bootstrap,
                    ),
                    pca_k=config.pca_k,
                )
                pca, forest = fit_fold_model(X[train], y[train], cand, seed, (r, 1, gi))
                acc = float(np.mean(_fold_predict(pca, forest, X[val]) == y[val]))
                if best is None or acc > best[0]:
                    best = (acc, n_trees)
            params = ForestParams(
                n_trees=best[1],
                max_depth=params.max_depth,
                min_leaf=params.min_leaf,
                features_per_split=params.features_per_split,
                bootstrap=params.bootstrap,
            )
        chosen.append(params.n_trees)
        cfg = LearnConfig(forest=params, pca_k=config.pca_k)
        pca, forest = fit_fold_model(X[train], y[train], cfg, seed, (r, 0))
        y_pred = _fold_predict(pca, forest, X[test])
        conf = confusion_matrix(y[test], y_pred, len(DIAGNOSES))
        accuracies.append(float(np.mean(y_pred == y[test])))
        confusions.append(conf)
    return SplitEvalReport(
        classes=DIAGNOSES, accuracies=accuracies, confusions=confusions, chosen_n_trees=chosen
    )


# ---------------------------------------------------------------------------
# Model persistence


@dataclass(eq=False)
class SavedModel:
    forest: Forest
    pca: PcaModel | None
    feature_names: tuple[str, ...]

    def predict_proba(self, X: np.ndarray, names: tuple[str, ...]) -> np.ndarray:
        if tuple(names) != tuple(self.feature_names):
            raise ValueError("feature names do not match the trained model")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.pca is not None:
            X = pca_transform(self.pca, X)
        return predict_proba(self.forest, X)


def save_model(model: SavedModel, path) -> None:
    forest = model.forest
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "classes": list(forest.classes),
        "feature_names": list(model.feature_names),
        "params": {
            "n_trees": forest.params.n_trees,
            "max_depth": forest.params.max_depth,
            "min_leaf": forest.params.min_leaf,
            "features_per_split": forest.params.features_per_split,
            "bootstrap": forest.params.bootstrap,
        },
        "n_features": forest.n_features,
        "trees": [
            {
                "children_left": t.children_left.tolist(),
                "children_right": t.children_right.tolist(),
                "feature": t.feature.tolist(),
                "threshold": [None if np.isnan(v) else v for v in t.threshold.tolist()],
                "value": t.value.tolist(),
            }
            for t in forest.trees
        ],
        "pca": None
        if model.pca is None
        else {
            "mean": model.pca.mean.tolist(),
            "components": model.pca.components.tolist(),
            "eigenvalues": model.pca.eigenvalues.tolist(),
        },
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


def load_model(path) -> SavedModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported model format version {doc.get('format_version')}")
    from .forest import Tree  # local import to keep module load order simple

    trees = [
        Tree(
            children_left=np.array(t["children_left"], dtype=np.int32),
            children_right=np.array(t["children_right"], dtype=np.int32),
            feature=np.array(t["feature"], dtype=np.int32),
            threshold=np.array([np.nan if v is None else v for v in t["threshold"]]),
            value=np.array(t["value"], dtype=np.int64),
        )
        for t in doc["trees"]
    ]
    p = doc["params"]
    forest = Forest(
        trees=trees,
        params=ForestParams(
            n_trees=p["n_trees"],
            max_depth=p["max_depth"],
            min_leaf=p["min_leaf"],
            features_per_split=p["features_per_split"],
            bootstrap=p["bootstrap"],
        ),
        classes=tuple(doc["classes"]),
        n_features=doc["n_features"],
    )
    pca = None
    if doc["pca"] is not None:
        pca = PcaModel(
            mean=np.array(doc["pca"]["mean"]),
            components=np.array(doc["pca"]["components"]),
            eigenvalues=np.array(doc["pca"]["eigenvalues"]),
        )
    return SavedModel(forest=forest, pca=pca, feature_names=tuple(doc["feature_names"]))
