"""Shapley-value attribution for forest predictions.

The coalition game is interventional: v(S) is the model output on a
composite sample taking the explained instance's values on S and a
background row's values elsewhere, averaged over the background rows. The
explanation target is the predicted probability of the explained
instance's predicted class.

shap_brute enumerates all feature subsets (small d only). shap_fast walks
each tree once per background row, collecting for every reachable leaf the
features forced "on" (instance side) and "off" (background side); the
Shapley value of such an on/off conjunction game has a closed form, so the
result is exact and matches the enumeration wherever that is feasible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np

from .learn.forest import Forest, predict_proba

BRUTE_MAX_FEATURES = 15


def _target_class_index(forest: Forest, x: np.ndarray, target_class) -> int:
    if target_class is not None:
        return list(forest.classes).index(target_class)
    proba = predict_proba(forest, x.reshape(1, -1))[0]
    return int(np.argmax(proba))


def shap_brute(
    forest: Forest, x: np.ndarray, background: np.ndarray, target_class=None
) -> np.ndarray:
    """Shapley values by full subset enumeration; oracle for shap_fast."""
    x = np.asarray(x, dtype=float)
    background = np.atleast_2d(np.asarray(background, dtype=float))
    if background.shape[0] == 0:
        raise ValueError("background must be non-empty")
    d = x.shape[0]
    if d > BRUTE_MAX_FEATURES:
        raise ValueError(f"subset enumeration infeasible for d={d} > {BRUTE_MAX_FEATURES}")
    t = _target_class_index(forest, x, target_class)

    v = np.empty(1 << d)
    for s in range(1 << d):
        on = np.array([(s >> i) & 1 for i in range(d)], dtype=bool)
        composite = np.where(on, x, background)
        v[s] = predict_proba(forest, composite)[:, t].mean()

    fact = [math.factorial(i) for i in range(d + 1)]
    phi = np.zeros(d)
    for i in range(d):
        for s in range(1 << d):
            if (s >> i) & 1:
                continue
            size = bin(s).count("1")
            weight = fact[size] * fact[d - size - 1] / fact[d]
            phi[i] += weight * (v[s | (1 << i)] - v[s])
    return phi


@lru_cache(maxsize=None)
def _leaf_weights(d: int, a: int, k: int) -> tuple[float, float]:
    """Shapley weights for the game v(S) = [A subset of S][B disjoint from S]
    with |A| = a, |B| = k over d features.

    Returns (w_on, w_off): each i in A gets +w_on, each i in B gets -w_off.
    Computed exactly with rational arithmetic, converted to float once.
    """
    g = d - a - k
    w_on = Fraction(0)
    w_off = Fraction(0)
    for extra in range(g + 1):
        ways = math.comb(g, extra)
        if a >= 1:
            s = a - 1 + extra
            w_on += Fraction(ways, d * math.comb(d - 1, s))
        if k >= 1:
            s = a + extra
            w_off += Fraction(ways, d * math.comb(d - 1, s))
    return float(w_on), float(w_off)


@dataclass(eq=False)
class _LeafPaths:
    """Per-leaf merged path conditions for one tree."""

    features: list[np.ndarray]  # unique feature ids along each leaf's path
    lows: list[np.ndarray]  # value must be > low
    highs: list[np.ndarray]  # and <= high
    values: list[np.ndarray]  # leaf class distribution


def _extract_leaf_paths(tree) -> _LeafPaths:
    paths = _LeafPaths([], [], [], [])

    def walk(node: int, conds: dict[int, tuple[float, float]]):
        if tree.children_left[node] < 0:
            feats = np.fromiter(conds.keys(), dtype=np.int64, count=len(conds))
            paths.features.append(feats)
            paths.lows.append(np.array([conds[f][0] for f in feats]))
            paths.highs.append(np.array([conds[f][1] for f in feats]))
            counts = tree.value[node]
            paths.values.append(counts / counts.sum())
            return
        f = int(tree.feature[node])
        thr = float(tree.threshold[node])
        lo, hi = conds.get(f, (-np.inf, np.inf))
        new_hi = min(hi, thr)  # left: x[f] <= thr
        if lo < new_hi:
            left = dict(conds)
            left[f] = (lo, new_hi)
            walk(int(tree.children_left[node]), left)
        new_lo = max(lo, thr)  # right: x[f] > thr
        if new_lo < hi:
            right = dict(conds)
            right[f] = (new_lo, hi)
            walk(int(tree.children_right[node]), right)

    walk(0, {})
    return paths


class TreeExplainer:
    """Exact interventional Shapley values for a Forest over a fixed background."""

    def __init__(self, forest: Forest, background: np.ndarray):
        self.forest = forest
        self.background = np.atleast_2d(np.asarray(background, dtype=float))
        if self.background.shape[0] == 0:
            raise ValueError("background must be non-empty")
        self.d = forest.n_features
        self._paths = [_extract_leaf_paths(t) for t in forest.trees]
        # background satisfaction per (tree, leaf): (n_background, n_path_features)
        self._b_sat = [
            [
                (self.background[:, f] > lo) & (self.background[:, f] <= hi)
                for f, lo, hi in zip(p.features, p.lows, p.highs)
            ]
            for p in self._paths
        ]

    def base_values(self) -> np.ndarray:
        """Expected model output per class over the background."""
        return predict_proba(self.forest, self.background).mean(axis=0)

    def shap_values(self, x: np.ndarray, target_class=None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        t = _target_class_index(self.forest, x, target_class)
        d = self.d
        n_b = self.background.shape[0]
        phi = np.zeros(d)
        for paths, b_sats in zip(self._paths, self._b_sat):
            for feats, lo, hi, val, b_sat in zip(
                paths.features, paths.lows, paths.highs, paths.values, b_sats
            ):
                c = float(val[t])
                if len(feats) == 0 or c == 0.0:
                    continue  # unconstrained leaf shifts only the base value
                x_sat = (x[feats] > lo) & (x[feats] <= hi)
                alive = ~(~x_sat[None, :] & ~b_sat).any(axis=1)
                if not alive.any():
                    continue
                on = x_sat[None, :] & ~b_sat[alive]
                off = ~x_sat[None, :] & b_sat[alive]
                a = on.sum(axis=1)
                k = off.sum(axis=1)
                w_on = np.array([_leaf_weights(d, ai, ki)[0] for ai, ki in zip(a, k)])
                w_off = np.array([_leaf_weights(d, ai, ki)[1] for ai, ki in zip(a, k)])
                np.add.at(phi, feats, c * (w_on[:, None] * on).sum(axis=0))
                np.add.at(phi, feats, -c * (w_off[:, None] * off).sum(axis=0))
        return phi / (len(self.forest.trees) * n_b)


def shap_fast(
    forest: Forest, x: np.ndarray, background: np.ndarray, target_class=None
) -> np.ndarray:
    """Exact interventional Shapley values via per-tree path traversal."""
    return TreeExplainer(forest, background).shap_values(np.asarray(x, dtype=float), target_class)


# ---------------------------------------------------------------------------
# Reports


@dataclass
class Explanation:
    base_value: float
    phi: np.ndarray
    predicted_value: float
    predicted_class: object


@dataclass
class ShapReport:
    instances: list[Explanation]
    ranking: list[tuple[str, float]]  # (feature name, mean |phi|), best first

    def as_dict(self, feature_names) -> dict:
        return {
            "instances": [
                {
                    "base_value": e.base_value,
                    "predicted_value": e.predicted_value,
                    "predicted_class": e.predicted_class,
                    "phi": {n: float(v) for n, v in zip(feature_names, e.phi)},
                }
                for e in self.instances
            ],
            "top_features": [
                {"rank": i + 1, "feature": name, "mean_abs_phi": value}
                for i, (name, value) in enumerate(self.ranking)
            ],
        }


def explain_instance(explainer: TreeExplainer, x: np.ndarray) -> Explanation:
    x = np.asarray(x, dtype=float)
    proba = predict_proba(explainer.forest, x.reshape(1, -1))[0]
    t = int(np.argmax(proba))
    phi = explainer.shap_values(x, target_class=explainer.forest.classes[t])
    base = float(explainer.base_values()[t])
    return Explanation(
        base_value=base,
        phi=phi,
        predicted_value=float(proba[t]),
        predicted_class=explainer.forest.classes[t],
    )


def global_importance(
    forest: Forest, X: np.ndarray, background: np.ndarray, feature_names
) -> ShapReport:
    """Rank features by mean |phi| over the dataset rows; ties by name order."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        raise ValueError("dataset must be non-empty")
    explainer = TreeExplainer(forest, background)
    instances = [explain_instance(explainer, x) for x in X]
    mean_abs = np.mean(np.abs(np.stack([e.phi for e in instances])), axis=0)
    order = sorted(range(len(feature_names)), key=lambda i: (-mean_abs[i], feature_names[i]))
    ranking = [(feature_names[i], float(mean_abs[i])) for i in order]
    return ShapReport(instances=instances, ranking=ranking)


def save_shap_report(report: ShapReport, feature_names, path, top_k: int = 10) -> None:
    doc = report.as_dict(feature_names)
    doc["top_features"] = doc["top_features"][:top_k]
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")
