import numpy as np
import pytest

from ductpipe.learn import ForestParams, balanced_sample, predict, predict_proba, train_forest
from ductpipe.learn.forest import Tree
from ductpipe.rng import derive_rng


class TestBalancedSample:
    def test_balanced_input_uniform(self):
        labels = np.array([0, 0, 1, 1])
        rng = derive_rng(0)
        idx = balanced_sample(labels, 100000, rng)
        frac = np.mean(labels[idx])
        assert 0.49 < frac < 0.51

    def test_skewed_input_balances(self):
        labels = np.array([0] * 90 + [1] * 10)
        rng = derive_rng(1)
        idx = balanced_sample(labels, 10000, rng)
        frac = np.mean(labels[idx])
        # binomial std ~ 0.005 at n=10000
        assert 0.49 < frac < 0.51

    def test_single_class_error(self):
        with pytest.raises(ValueError):
            balanced_sample(np.zeros(5, dtype=int), 10, derive_rng(2))


def separable_data(rng, n=40):
    X = np.vstack([rng.normal(0, 0.5, (n // 2, 3)), rng.normal(4, 0.5, (n // 2, 3))])
    y = np.array([0] * (n // 2) + [1] * (n // 2))
    return X, y


class TestTrainForest:
    def test_separable_training_accuracy(self):
        rng = derive_rng(3)
        X, y = separable_data(rng)
        forest = train_forest(X, y, ForestParams(n_trees=10), seed=0)
        pred = np.argmax(predict_proba(forest, X), axis=1)
        assert (pred == y).all()

    def test_deterministic_given_seed(self):
        rng = derive_rng(4)
        X, y = separable_data(rng)
        probes = rng.normal(2, 3, (100, 3))
        f1 = train_forest(X, y, ForestParams(n_trees=15), seed=9)
        f2 = train_forest(X, y, ForestParams(n_trees=15), seed=9)
        assert np.array_equal(predict_proba(f1, probes), predict_proba(f2, probes))
        f3 = train_forest(X, y, ForestParams(n_trees=15), seed=10)
        assert not np.array_equal(predict_proba(f1, probes), predict_proba(f3, probes))

    def test_depth1_matches_exhaustive_gini_scan(self):
        rng = derive_rng(5)
        x = rng.normal(size=60)
        y = (x > 0.3).astype(int)
        y[rng.choice(60, 6, replace=False)] ^= 1  # label noise
        X = x.reshape(-1, 1)

        def exhaustive_best_threshold(X1, y1):
            vs = np.sort(np.unique(X1))
            best = None
            for a, b in zip(vs[:-1], vs[1:]):
                thr = (a + b) / 2
                left = y1[X1 <= thr]
                right = y1[X1 > thr]
                gini = 0.0
                for part in (left, right):
                    p = np.bincount(part, minlength=2) / len(part)
                    gini += len(part) / len(y1) * (1 - (p**2).sum())
                if best is None or gini < best[0]:
                    best = (gini, thr)
            return best[1]

        params = ForestParams(n_trees=8, max_depth=1, features_per_split=1, bootstrap=True)
        forest = train_forest(X, y, params, seed=1)
        for t, tree in enumerate(forest.trees):
            boot = balanced_sample(y, len(y), derive_rng(1, t))
            want_thr = exhaustive_best_threshold(X[boot, 0], y[boot])
            assert tree.threshold[0] == pytest.approx(want_thr)

    def test_single_class_error(self):
        X = np.zeros((10, 2))
        with pytest.raises(ValueError):
            train_forest(X, np.zeros(10, dtype=int), ForestParams(n_trees=2), seed=0)

    def test_leaf_counts_sum_to_bootstrap_size(self):
        rng = derive_rng(6)
        X, y = separable_data(rng, 30)
        forest = train_forest(X, y, ForestParams(n_trees=5), seed=2)
        for tree in forest.trees:
            leaves = tree.children_left < 0
            assert tree.value[leaves].sum() == len(y)


class TestPredict:
    def test_identical_stumps(self):
        # forest of identical stumps: probabilities equal a single stump's leaf mix
        value = np.array([[6, 2], [5, 1], [1, 1]])
        stump = Tree(
            children_left=np.array([1, -1, -1], dtype=np.int32),
            children_right=np.array([2, -1, -1], dtype=np.int32),
            feature=np.array([0, -1, -1], dtype=np.int32),
            threshold=np.array([0.5, np.nan, np.nan]),
            value=value,
        )
        from ductpipe.learn.forest import Forest

        forest = Forest(trees=[stump] * 4, params=ForestParams(n_trees=4),
                        classes=(0, 1), n_features=1)
        _, proba = predict(forest, np.array([0.0]))
        assert np.allclose(proba, [5 / 6, 1 / 6])

    def test_hand_averaged_two_trees(self):
        t1 = Tree(
            children_left=np.array([1, -1, -1], dtype=np.int32),
            children_right=np.array([2, -1, -1], dtype=np.int32),
            feature=np.array([0, -1, -1], dtype=np.int32),
            threshold=np.array([0.0, np.nan, np.nan]),
            value=np.array([[4, 4], [4, 0], [0, 4]]),
        )
        t2 = Tree(
            children_left=np.array([1, -1, -1], dtype=np.int32),
            children_right=np.array([2, -1, -1], dtype=np.int32),
            feature=np.array([0, -1, -1], dtype=np.int32),
            threshold=np.array([1.0, np.nan, np.nan]),
            value=np.array([[4, 4], [3, 1], [1, 3]]),
        )
        from ductpipe.learn.forest import Forest

        forest = Forest(trees=[t1, t2], params=ForestParams(n_trees=2),
                        classes=(0, 1), n_features=1)
        # x = 0.5: tree1 right leaf (0,1), tree2 left leaf (0.75, 0.25)
        cls, proba = predict(forest, np.array([0.5]))
        assert np.allclose(proba, [(0 + 0.75) / 2, (1 + 0.25) / 2])
        assert cls == 1

    def test_probabilities_sum_to_one(self):
        rng = derive_rng(7)
        X, y = separable_data(rng)
        forest = train_forest(X, y, ForestParams(n_trees=7), seed=3)
        probes = rng.normal(2, 3, (50, 3))
        proba = predict_proba(forest, probes)
        assert np.allclose(proba.sum(axis=1), 1.0, atol=1e-9)
        assert (proba >= 0).all()

    def test_dimension_mismatch(self):
        rng = derive_rng(8)
        X, y = separable_data(rng)
        forest = train_forest(X, y, ForestParams(n_trees=2), seed=0)
        with pytest.raises(ValueError):
            predict(forest, np.zeros(5))

    def test_argmax_tie_breaks_low_index(self):
        value = np.array([[2, 2]])
        leaf = Tree(
            children_left=np.array([-1], dtype=np.int32),
            children_right=np.array([-1], dtype=np.int32),
            feature=np.array([-1], dtype=np.int32),
            threshold=np.array([np.nan]),
            value=value,
        )
        from ductpipe.learn.forest import Forest

        forest = Forest(trees=[leaf], params=ForestParams(n_trees=1),
                        classes=("neg", "pos"), n_features=2)
        cls, proba = predict(forest, np.zeros(2))
        assert cls == "neg" and np.allclose(proba, [0.5, 0.5])
