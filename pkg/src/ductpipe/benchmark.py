"""Built-in benchmark for the three-level feature extraction hot path."""

from __future__ import annotations

import time

import numpy as np

from .features import extract_feature_vector
from .instances import derive_instances_weak
from .raster import binarize
from .rng import derive_rng
from .synth import ClassParams, SynthConfig, generate_roi


def benchmark_raster(size: int, ducts: int, seed: int):
    """A dense many-duct ROI plus its weakly-derived instance map."""
    params = ClassParams(
        big_count=(0, 0),
        small_count=(ducts, ducts),
        small_radius=(8.0, 16.0),
        hot_on_small=True,
        hot_necrosis_prob=0.3,
    )
    config = SynthConfig(size=size, bg_margin_max=0, classes={"DCIS": params})
    raster, boxes = generate_roi("DCIS", config, derive_rng(seed))
    inst = derive_instances_weak(binarize(raster), boxes)
    return raster, inst


def run_feature_benchmark(size: int = 512, ducts: int = 50, runs: int = 5, seed: int = 0) -> dict:
    """Time full three-level extraction; returns per-run seconds and the median."""
    raster, inst = benchmark_raster(size, ducts, seed)
    times = []
    for _ in range(runs):
        start = time.perf_counter()
        extract_feature_vector(raster, inst)
        times.append(time.perf_counter() - start)
    return {
        "size": size,
        "ducts": len(inst.instances),
        "runs": times,
        "median_seconds": float(np.median(times)),
    }
