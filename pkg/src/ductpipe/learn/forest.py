"""Bagged CART decision-tree ensemble with Gini splits and class-balanced bootstraps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..rng import derive_rng


def balanced_sample(labels: np.ndarray, n_out: int, rng: np.random.Generator) -> np.ndarray:
    """Sample indices with replacement, weighting each example inversely to
    its class frequency so expected class proportions come out equal."""
    labels = np.asarray(labels)
    classes, counts = np.unique(labels, return_counts=True)
    if len(classes) < 2:
        raise ValueError("balanced sampling needs at least 2 classes present")
    weight_by_class = {c: 1.0 / (len(classes) * cnt) for c, cnt in zip(classes, counts)}
    weights = np.array([weight_by_class[c] for c in labels])
    return rng.choice(len(labels), size=n_out, replace=True, p=weights)


@dataclass
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None
    min_leaf: int = 1
    features_per_split: int | None = None  # None -> ceil(sqrt(d))
    bootstrap: bool = True


@dataclass(eq=False)
class Tree:
    """Flat-array binary tree; children index -1 marks a leaf."""

    children_left: np.ndarray  # int32
    children_right: np.ndarray
    feature: np.ndarray  # int32, -1 at leaves
    threshold: np.ndarray  # float64, nan at leaves; x[f] <= t goes left
    value: np.ndarray  # int64 (n_nodes, n_classes) class counts of training rows

    @property
    def n_nodes(self) -> int:
        return len(self.children_left)

    def leaf_for(self, x: np.ndarray) -> int:
        node = 0
        while self.children_left[node] >= 0:
            if x[self.feature[node]] <= self.threshold[node]:
                node = self.children_left[node]
            else:
                node = self.children_right[node]
        return node


@dataclass(eq=False)
class Forest:
    trees: list[Tree]
    params: ForestParams
    classes: tuple
    n_features: int


class _TreeBuilder:
    def __init__(self, X, y, n_classes, params: ForestParams, rng):
        self.X = X
        self.y = y
        self.n_classes = n_classes
        self.params = params
        self.rng = rng
        self.d = X.shape[1]
        self.k = params.features_per_split or int(np.ceil(np.sqrt(self.d)))
        self.k = min(self.k, self.d)
        self.children_left: list[int] = []
        self.children_right: list[int] = []
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.value: list[np.ndarray] = []

    def _new_node(self, counts) -> int:
        self.children_left.append(-1)
        self.children_right.append(-1)
        self.feature.append(-1)
        self.threshold.append(float("nan"))
        self.value.append(counts)
        return len(self.children_left) - 1

    def build(self, idx: np.ndarray) -> Tree:
        stack = [(idx, 0, self._new_node(np.bincount(self.y[idx], minlength=self.n_classes)))]
        while stack:
            rows, depth, node = stack.pop()
            counts = self.value[node]
            if (
                counts.max() == counts.sum()  # pure
                or len(rows) < 2 * self.params.min_leaf
                or (self.params.max_depth is not None and depth >= self.params.max_depth)
            ):
                continue
            split = self._best_split(rows)
            if split is None:
                continue
            f, t, left_rows, right_rows = split
            self.feature[node] = f
            self.threshold[node] = t
            left = self._new_node(np.bincount(self.y[left_rows], minlength=self.n_classes))
            right = self._new_node(np.bincount(self.y[right_rows], minlength=self.n_classes))
            self.children_left[node] = left
            self.children_right[node] = right
            stack.append((right_rows, depth + 1, right))
            stack.append((left_rows, depth + 1, left))
        return Tree(
            children_left=np.array(self.children_left, dtype=np.int32),
            children_right=np.array(self.children_right, dtype=np.int32),
            feature=np.array(self.feature, dtype=np.int32),
            threshold=np.array(self.threshold),
            value=np.stack(self.value).astype(np.int64),
        )

    def _best_split(self, rows: np.ndarray):
        m = len(rows)
        min_leaf = self.params.min_leaf
        candidates = self.rng.choice(self.d, size=self.k, replace=False)
        y = self.y[rows]
        onehot = np.zeros((m, self.n_classes))
        onehot[np.arange(m), y] = 1.0
        best = None  # (impurity, feature, threshold, order, pos)
        for f in candidates.tolist():
            v = self.X[rows, f]
            order = np.argsort(v, kind="stable")
            vs = v[order]
            left = np.cumsum(onehot[order], axis=0)  # counts after taking i+1 rows
            total = left[-1]
            nl = np.arange(1, m + 1)
            # weighted Gini impurity: n*g(n) = n - sum(c^2)/n, summed for both sides
            with np.errstate(divide="ignore", invalid="ignore"):
                gl = nl - (left**2).sum(axis=1) / nl
                nr = m - nl
                right = total - left
                gr = np.where(nr > 0, nr - (right**2).sum(axis=1) / np.maximum(nr, 1), 0.0)
            score = (gl + gr) / m
            valid = np.zeros(m, dtype=bool)
            valid[:-1] = vs[:-1] < vs[1:]
            valid[: min_leaf - 1] = False
            if min_leaf > 1:
                valid[m - min_leaf :] = False
            else:
                valid[m - 1] = False
            if not valid.any():
                continue
            pos = int(np.flatnonzero(valid)[np.argmin(score[valid])])
            if best is None or score[pos] < best[0]:
                thr = (vs[pos] + vs[pos + 1]) / 2.0
                best = (score[pos], f, thr, order, pos)
        if best is None:
            return None
        _, f, thr, order, pos = best
        left_rows = rows[order[: pos + 1]]
        right_rows = rows[order[pos + 1 :]]
        return f, thr, left_rows, right_rows


def train_forest(X: np.ndarray, y: np.ndarray, params: ForestParams, seed: int,
                 classes: tuple | None = None, path: tuple = ()) -> Forest:
    """Train a bagged forest; deterministic given the seed.

    y holds class codes 0..C-1; classes optionally names them for reports.
    Each tree sees a class-balanced bootstrap of size n when bootstrap is on.
    Per-tree RNG streams derive from (seed, *path, tree index), so callers
    running many fits off one master seed pass a distinct path per fit.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be (n, d) with matching y")
    if len(X) < 2:
        raise ValueError(f"need at least 2 samples, got {len(X)}")
    present = np.unique(y)
    if len(present) < 2:
        raise ValueError("training data contains a single class")
    n_classes = int(y.max()) + 1 if classes is None else len(classes)
    if classes is None:
        classes = tuple(range(n_classes))
    trees = []
    for t in range(params.n_trees):
        rng = derive_rng(seed, *path, t)
        if params.bootstrap:
            idx = balanced_sample(y, len(y), rng)
        else:
            idx = np.arange(len(y))
        builder = _TreeBuilder(X, y, n_classes, params, rng)
        trees.append(builder.build(idx))
    return Forest(trees=trees, params=params, classes=classes, n_features=X.shape[1])


def predict_proba(forest: Forest, X: np.ndarray) -> np.ndarray:
    """Mean over trees of leaf class-frequency vectors; rows sum to 1."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != forest.n_features:
        raise ValueError(f"expected {forest.n_features} features, got {X.shape[1]}")
    out = np.zeros((len(X), len(forest.classes)))
    for tree in forest.trees:
        for i, x in enumerate(X):
            counts = tree.value[tree.leaf_for(x)]
            out[i] += counts / counts.sum()
    return out / len(forest.trees)


def predict(forest: Forest, x: np.ndarray):
    """Returns (class, probabilities); argmax ties break toward lower index."""
    proba = predict_proba(forest, x)[0]
    return forest.classes[int(np.argmax(proba))], proba
