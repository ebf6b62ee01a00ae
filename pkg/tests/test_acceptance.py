"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line. Run with `pytest tests/test_acceptance.py -v -s`.

The synthetic four-way and ablation criteria share one generated dataset
(100 ROIs per class at 512x512) through a module-scoped fixture.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from ductpipe.benchmark import run_feature_benchmark
from ductpipe.cli import main
from ductpipe.explain import shap_brute, shap_fast, TreeExplainer
from ductpipe.features import (
    FEATURE_NAMES,
    Region,
    cooccurrence_features,
    extract_feature_vector,
    feature_level,
    histogram_features,
)
from ductpipe.instances import connected_components, derive_instances_weak
from ductpipe.learn import ForestParams, LearnConfig, fit_fold_model, pca_fit, run_split_eval, train_forest
from ductpipe.learn.forest import predict_proba
from ductpipe.raster import DIAGNOSES, BitMask, BoundingBox, LabelRaster, binarize
from ductpipe.rng import derive_rng
from ductpipe.synth import SynthConfig, generate_roi, _split_counts

from .oracles import brute_weak_assign, flood_fill_components

PER_CLASS = 100


def report(name: str, ok: bool, detail: str = ""):
    print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def synth_features():
    """Default synthetic dataset (100 ROIs/class): features, labels, splits."""
    cfg = SynthConfig()
    X, dx_list, splits = [], [], []
    n_train, n_val, _ = _split_counts(PER_CLASS)
    for ci, dx in enumerate(DIAGNOSES):
        for j in range(PER_CLASS):
            raster, boxes = generate_roi(dx, cfg, derive_rng(0, ci, j))
            inst = derive_instances_weak(binarize(raster), boxes)
            X.append(extract_feature_vector(raster, inst).values)
            dx_list.append(dx)
            splits.append("train" if j < n_train else ("val" if j < n_train + n_val else "test"))
    return np.stack(X), dx_list, splits


class TestFeatureNormalization:
    def test_histogram_and_cooccurrence_sums(self):
        start = time.perf_counter()
        rng = derive_rng(1000)
        checked = 0
        while checked < 500:
            h, w = int(rng.integers(1, 40)), int(rng.integers(1, 40))
            raster = LabelRaster(rng.integers(0, 8, size=(h, w), dtype=np.uint8))
            kind = checked % 3
            if kind == 0:
                region = Region.whole(raster)
            elif kind == 1:
                bw, bh = int(rng.integers(1, w + 1)), int(rng.integers(1, h + 1))
                bx, by = int(rng.integers(0, w - bw + 1)), int(rng.integers(0, h - bh + 1))
                region = Region.box(BoundingBox(bx, by, bw, bh))
            else:
                member = rng.random((h, w)) < 0.5
                if not member.any():
                    continue
                region = Region("mask", 0, 0, w, h, member)
            hist = histogram_features(raster, region)
            assert abs(hist.sum() - 1.0) <= 1e-9
            for include_bd in (False, True):
                cooc = cooccurrence_features(raster, region, include_bd)
                total = cooc.vector(include_bd).sum()
                assert cooc.normalized[8, 8] == 0.0 and cooc.counts[8, 8] == 0
                if cooc.counts.any():
                    assert abs(total - 1.0) <= 1e-9
                else:
                    assert total == 0.0
            checked += 1
        elapsed = time.perf_counter() - start
        report("feature-normalization (500 regions, 1e-9)", elapsed < 10.0,
               f"{elapsed:.2f}s < 10s")


class TestConnectedComponentsOracle:
    def test_union_find_equals_flood_fill(self):
        start = time.perf_counter()
        rng = derive_rng(1001)
        for i in range(200):
            bits = rng.random((64, 64)) < rng.uniform(0.2, 0.8)
            conn = 4 if i % 2 == 0 else 8
            got = connected_components(BitMask(bits), conn)
            want = flood_fill_components(bits, conn)
            assert np.array_equal(got.ids, want)
        elapsed = time.perf_counter() - start
        report("connected-components oracle (200 masks, both connectivities)",
               elapsed < 5.0, f"{elapsed:.2f}s < 5s")


class TestWeakDerivationBruteForce:
    def test_per_pixel_assignment(self):
        start = time.perf_counter()
        rng = derive_rng(1002)
        for _ in range(100):
            h, w = int(rng.integers(4, 33)), int(rng.integers(4, 33))
            bits = rng.random((h, w)) < 0.6
            boxes = []
            for _ in range(int(rng.integers(0, 6))):
                bw, bh = int(rng.integers(1, w + 1)), int(rng.integers(1, h + 1))
                bx, by = int(rng.integers(0, w - bw + 1)), int(rng.integers(0, h - bh + 1))
                boxes.append(BoundingBox(bx, by, bw, bh))
            got = derive_instances_weak(BitMask(bits), boxes)
            want = brute_weak_assign(bits, [(b.x, b.y, b.w, b.h) for b in boxes])
            assert np.array_equal(got.ids, want)
        elapsed = time.perf_counter() - start
        report("weak-derivation brute force (100 cases)", elapsed < 5.0,
               f"{elapsed:.2f}s < 5s")


class TestShapOracle:
    def test_fast_equals_brute_and_local_accuracy(self):
        start = time.perf_counter()
        rng = derive_rng(1003)
        worst = 0.0
        for _ in range(50):
            d = int(rng.integers(2, 9))
            n = 30
            X = rng.normal(size=(n, d))
            y = (X @ rng.normal(size=d) > 0).astype(int)
            if len(np.unique(y)) < 2:
                y[0] = 1 - y[0]
            forest = train_forest(
                X, y,
                ForestParams(n_trees=int(rng.integers(1, 6)), max_depth=int(rng.integers(1, 4))),
                seed=int(rng.integers(1 << 30)),
            )
            background = X[rng.choice(n, 5, replace=False)]
            x = rng.normal(size=d)
            diff = np.abs(shap_brute(forest, x, background) - shap_fast(forest, x, background))
            worst = max(worst, float(diff.max()))
        assert worst <= 1e-9

        # local accuracy at full feature dimension
        d = 150
        X = rng.normal(size=(60, d))
        y = (X @ rng.normal(size=d) > 0).astype(int)
        forest = train_forest(X, y, ForestParams(n_trees=10, max_depth=6), seed=4)
        explainer = TreeExplainer(forest, X[:16])
        worst_eff = 0.0
        for _ in range(5):
            x = rng.normal(size=d)
            proba = predict_proba(forest, x.reshape(1, -1))[0]
            t = int(np.argmax(proba))
            phi = explainer.shap_values(x, target_class=forest.classes[t])
            base = explainer.base_values()[t]
            worst_eff = max(worst_eff, abs(base + phi.sum() - proba[t]))
        elapsed = time.perf_counter() - start
        ok = worst <= 1e-9 and worst_eff <= 1e-9 and elapsed < 60.0
        report("shap oracle equivalence + local accuracy",
               ok, f"max|dphi|={worst:.2e}, |efficiency err|={worst_eff:.2e}, {elapsed:.1f}s < 60s")


class TestPcaChecks:
    def test_orthonormal_reconstruction_and_trigger(self):
        rng = derive_rng(1004)
        X = rng.normal(size=(30, 12))
        model = pca_fit(X, 12)
        orth = np.abs(model.components @ model.components.T - np.eye(12)).max()
        assert orth <= 1e-9

        basis = np.linalg.qr(rng.normal(size=(12, 5)))[0].T
        Xk = rng.normal(size=(40, 5)) @ basis + rng.normal(size=12)
        mk = pca_fit(Xk, 5)
        from ductpipe.learn import pca_inverse_transform, pca_transform

        recon = np.abs(pca_inverse_transform(mk, pca_transform(mk, Xk)) - Xk).max()
        assert recon <= 1e-9

        # PCA applied exactly when d > n_train, reduced to 20 dimensions
        cfg = LearnConfig(forest=ForestParams(n_trees=3))
        X_wide = rng.normal(size=(25, 150))
        y = np.array([0, 1] * 12 + [0])
        pca_on, forest_on = fit_fold_model(X_wide, y, cfg, seed=0, path=(0,))
        assert pca_on is not None and pca_on.k == 20 and forest_on.n_features == 20
        X_tall = rng.normal(size=(160, 150))
        y_tall = np.array([0, 1] * 80)
        pca_off, forest_off = fit_fold_model(X_tall, y_tall, cfg, seed=0, path=(0,))
        assert pca_off is None and forest_off.n_features == 150
        report("pca checks (orthonormal, rank-k reconstruction, k=20 trigger)", True,
               f"orth={orth:.1e}, recon={recon:.1e}")


class TestPerformanceContract:
    def test_feature_extraction_under_one_second(self):
        result = run_feature_benchmark(size=512, ducts=50, runs=5, seed=0)
        median = result["median_seconds"]
        ok = median <= 1.0 and result["ducts"] == 50
        report("feature extraction 512x512 / 50 ducts (5-run median)", ok,
               f"median {median * 1000:.0f}ms <= 1000ms")


class TestSyntheticFourWay:
    def test_oracle_validates_threshold(self, synth_features):
        X, dx_list, splits = synth_features
        tr = np.array([s == "train" for s in splits])
        te = np.array([s == "test" for s in splits])
        code = {d: i for i, d in enumerate(DIAGNOSES)}
        y = np.array([code[d] for d in dx_list])
        mu, sd = X[tr].mean(axis=0), X[tr].std(axis=0)
        sd[sd == 0] = 1.0
        Z = (X - mu) / sd
        centroids = np.stack([Z[tr & (y == c)].mean(axis=0) for c in range(4)])
        pred = np.argmin(((Z[te][:, None, :] - centroids[None]) ** 2).sum(axis=-1), axis=1)
        acc = float(np.mean(pred == y[te]))
        report("nearest-centroid oracle validates 0.90 threshold", acc >= 0.90, f"acc={acc:.4f}")

    def test_forest_mean_accuracy(self, synth_features):
        start = time.perf_counter()
        X, dx_list, splits = synth_features
        rep = run_split_eval(X, dx_list, splits, LearnConfig(), repeats=10, seed=11)
        elapsed = time.perf_counter() - start
        ok = rep.accuracy_mean >= 0.90 and elapsed < 600
        report("synthetic four-way mean accuracy (10 seeds)", ok,
               f"{rep.accuracy_mean:.4f} +/- {rep.accuracy_std:.4f} >= 0.90, {elapsed:.0f}s < 600s")


class TestAblationDirection:
    def test_level_ordering(self, synth_features):
        X, dx_list, splits = synth_features
        accs = {}
        for tag, level in (("all", None), ("roi", "ROI"), ("mask", "duct mask")):
            if level is None:
                cols = list(range(X.shape[1]))
            else:
                cols = [i for i, n in enumerate(FEATURE_NAMES) if feature_level(n) == level]
            rep = run_split_eval(X[:, cols], dx_list, splits, LearnConfig(), repeats=10, seed=11)
            accs[tag] = rep.accuracy_mean
        ok = accs["all"] > accs["roi"] >= accs["mask"]
        report("ablation ordering all > roi-only >= duct-mask-only", ok,
               f"all={accs['all']:.4f} roi={accs['roi']:.4f} mask={accs['mask']:.4f}")


class TestCliDeterminism:
    def test_every_stage_byte_identical(self, tmp_path):
        def tree_bytes(path: Path):
            return {p.relative_to(path): p.read_bytes()
                    for p in sorted(path.rglob("*")) if p.is_file()}

        outputs = []
        for run in ("r1", "r2"):
            base = tmp_path / run
            data = base / "data"
            inst = base / "inst"
            cc = base / "cc"
            files = {}
            assert main(["synth", "--out", str(data), "--per-class", "4", "--seed", "21"]) == 0
            assert main(["derive", "--dataset", str(data), "--out", str(inst),
                         "--method", "weak", "--seed", "21"]) == 0
            assert main(["derive", "--dataset", str(data), "--out", str(cc),
                         "--method", "cc", "--seed", "21"]) == 0
            first = sorted(inst.glob("*.pgm"))[0].name
            assert main(["match", "--a", str(inst / first), "--b", str(cc / first),
                         "--out", str(base / "match.json")]) == 0
            assert main(["features", "--dataset", str(data), "--instances", str(inst),
                         "--out", str(base / "features.csv"), "--seed", "21"]) == 0
            assert main(["train", "--features", str(base / "features.csv"), "--task", "fourway",
                         "--out", str(base / "model.json"), "--n-trees", "8", "--seed", "21"]) == 0
            assert main(["eval", "--features", str(base / "features.csv"), "--task", "fourway",
                         "--dataset", str(data), "--out", str(base / "fourway.json"),
                         "--repeats", "2", "--n-trees", "8", "--seed", "21"]) == 0
            assert main(["eval", "--features", str(base / "features.csv"),
                         "--task", "dcis-vs-atypia", "--out", str(base / "binary.json"),
                         "--repeats", "2", "--n-trees", "8", "--seed", "21"]) == 0
            assert main(["explain", "--model", str(base / "model.json"),
                         "--features", str(base / "features.csv"),
                         "--out", str(base / "shap.json"), "--background", "4",
                         "--limit", "2", "--seed", "21"]) == 0
            outputs.append(tree_bytes(base))
        ok = outputs[0] == outputs[1]
        if not ok:
            diff = {k for k in outputs[0] if outputs[0].get(k) != outputs[1].get(k)}
            report("cli determinism (all stages, two runs)", False, f"differs: {sorted(diff)[:5]}")
        report("cli determinism (all stages, two runs)", ok,
               f"{len(outputs[0])} files byte-identical")
