"""Synthetic label rasters with class-conditional duct morphology.

Every ROI is stroma with a random background margin, a few desmoplastic
patches and debris blobs, plus ring-shaped ducts whose epithelium mix,
lumen size and necrotic core depend on the diagnosis. Invasive ROIs
additionally scatter malignant blobs outside every annotation box. The
diagnostic signal therefore lives mostly in duct-level statistics, while
ROI-level frequencies carry dilution noise from the margins and debris.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .raster import (
    DIAGNOSES,
    BoundingBox,
    LabelRaster,
    RoiRecord,
    TissueLabel,
    save_boxes,
    save_manifest,
    write_label_raster,
)
from .rng import derive_rng


class PlacementError(RuntimeError):
    """Raised when ducts cannot be placed without overlap after bounded retries."""


@dataclass(frozen=True)
class ClassParams:
    """Duct population of one diagnosis.

    Every ROI gets a few big and several small ducts. A duct is either
    "hot" (malignant epithelium filling most of the duct, secretion pocket,
    necrosis-prone core) or "cold" (mostly benign ring around an open
    secretion lumen, rare luminal debris). hot_on_small picks which size
    class carries the hot template (None = all cold). Because the total
    big-duct area matches the total small-duct area, swapping the template
    between size classes leaves area-pooled ROI statistics nearly unchanged
    while the unweighted per-duct means move a lot - the signal lives in
    the instances, not the pixels.
    """

    big_count: tuple[int, int] = (3, 4)
    small_count: tuple[int, int] = (6, 8)
    big_radius: tuple[float, float] = (29.0, 37.0)
    small_radius: tuple[float, float] = (20.0, 26.0)
    hot_on_small: bool | None = None
    hot_me: tuple[float, float] = (0.72, 0.88)
    cold_me: tuple[float, float] = (0.04, 0.14)
    lumen_frac: tuple[float, float] = (0.40, 0.55)  # SC radius / outer radius
    hot_necrosis_prob: float = 0.5  # NC disk at 0.35 lumen radius
    cold_necrosis_prob: float = 0.25
    scatter_count: tuple[int, int] = (0, 0)  # stray ME blobs outside all boxes
    ds_patches: tuple[int, int] = (0, 2)


DEFAULT_CLASS_PARAMS: dict[str, ClassParams] = {
    "Benign": ClassParams(hot_on_small=None),
    "Atypia": ClassParams(hot_on_small=False),
    "DCIS": ClassParams(hot_on_small=True),
    "Invasive": ClassParams(
        hot_on_small=True,
        scatter_count=(18, 32),
        ds_patches=(6, 12),
    ),
}


@dataclass
class SynthConfig:
    size: int = 512
    bg_margin_max: int = 60
    debris_count: tuple[int, int] = (3, 12)
    debris_radius: tuple[float, float] = (4.0, 9.0)
    scatter_radius: tuple[float, float] = (3.0, 7.0)
    ds_patch_radius: tuple[float, float] = (15.0, 55.0)
    rim_me: float = 0.45  # fixed epithelium mix in the boundary rims
    rim_width: float = 1.5
    classes: dict[str, ClassParams] = field(
        default_factory=lambda: dict(DEFAULT_CLASS_PARAMS)
    )
    placement_retries: int = 200


def _draw_disk(labels: np.ndarray, cx: float, cy: float, r: float, value: int,
               inner: float = 0.0) -> None:
    """Set pixels with inner < dist <= r to value (annulus; inner 0 = disk)."""
    h, w = labels.shape
    y0, y1 = max(int(cy - r) - 1, 0), min(int(cy + r) + 2, h)
    x0, x1 = max(int(cx - r) - 1, 0), min(int(cx + r) + 2, w)
    ys = np.arange(y0, y1)[:, None] - cy
    xs = np.arange(x0, x1)[None, :] - cx
    d2 = ys * ys + xs * xs
    sel = (d2 <= r * r) & (d2 > inner * inner)
    labels[y0:y1, x0:x1][sel] = value


def _draw_ring_epithelium(labels, cx, cy, r_out, r_in, me_frac, rng) -> None:
    h, w = labels.shape
    y0, y1 = max(int(cy - r_out) - 1, 0), min(int(cy + r_out) + 2, h)
    x0, x1 = max(int(cx - r_out) - 1, 0), min(int(cx + r_out) + 2, w)
    ys = np.arange(y0, y1)[:, None] - cy
    xs = np.arange(x0, x1)[None, :] - cx
    d2 = ys * ys + xs * xs
    sel = (d2 <= r_out * r_out) & (d2 > r_in * r_in)
    mix = np.where(rng.random(sel.shape) < me_frac, TissueLabel.ME, TissueLabel.BE)
    window = labels[y0:y1, x0:x1]
    window[sel] = mix[sel]


def _draw_ellipse(labels, cx, cy, rx, ry, value) -> None:
    h, w = labels.shape
    y0, y1 = max(int(cy - ry) - 1, 0), min(int(cy + ry) + 2, h)
    x0, x1 = max(int(cx - rx) - 1, 0), min(int(cx + rx) + 2, w)
    ys = (np.arange(y0, y1)[:, None] - cy) / ry
    xs = (np.arange(x0, x1)[None, :] - cx) / rx
    sel = ys * ys + xs * xs <= 1.0
    labels[y0:y1, x0:x1][sel] = value


def _boxes_intersect(b: BoundingBox, x0: float, y0: float, x1: float, y1: float) -> bool:
    return not (x1 < b.x or x0 > b.x + b.w - 1 or y1 < b.y or y0 > b.y + b.h - 1)


def _sample(rng, lo_hi: tuple[float, float]) -> float:
    return float(rng.uniform(lo_hi[0], lo_hi[1]))


def _sample_int(rng, lo_hi: tuple[int, int]) -> int:
    return int(rng.integers(lo_hi[0], lo_hi[1] + 1))


def generate_roi(diagnosis: str, config: SynthConfig, rng: np.random.Generator):
    """Generate one ROI; returns (LabelRaster, boxes). Deterministic given rng."""
    if diagnosis not in config.classes:
        raise ValueError(f"no class parameters for diagnosis {diagnosis!r}")
    p = config.classes[diagnosis]
    size = config.size
    labels = np.full((size, size), int(TissueLabel.NS), dtype=np.uint8)

    margins = rng.integers(0, config.bg_margin_max + 1, size=4)  # top, bottom, left, right
    iy0, iy1 = int(margins[0]), size - int(margins[1])
    ix0, ix1 = int(margins[2]), size - int(margins[3])

    for _ in range(_sample_int(rng, p.ds_patches)):
        cx = rng.uniform(ix0, ix1)
        cy = rng.uniform(iy0, iy1)
        _draw_ellipse(labels, cx, cy,
                      _sample(rng, config.ds_patch_radius),
                      _sample(rng, config.ds_patch_radius), int(TissueLabel.DS))

    # ducts: non-overlapping, one annotation box each
    specs: list[tuple[float, bool]] = []  # (outer radius, hot template)
    for _ in range(_sample_int(rng, p.big_count)):
        specs.append((_sample(rng, p.big_radius), p.hot_on_small is False))
    for _ in range(_sample_int(rng, p.small_count)):
        specs.append((_sample(rng, p.small_radius), p.hot_on_small is True))
    if specs:
        rng.shuffle(specs)

    placed: list[tuple[float, float, float]] = []
    boxes: list[BoundingBox] = []
    for r, hot in specs:
        ok = False
        for _ in range(config.placement_retries):
            lo_y, hi_y = iy0 + r + 3, iy1 - r - 3
            lo_x, hi_x = ix0 + r + 3, ix1 - r - 3
            if lo_y >= hi_y or lo_x >= hi_x:
                break
            cy = rng.uniform(lo_y, hi_y)
            cx = rng.uniform(lo_x, hi_x)
            if all((cx - ox) ** 2 + (cy - oy) ** 2 >= (r + orr + 4) ** 2
                   for ox, oy, orr in placed):
                ok = True
                break
        if not ok:
            raise PlacementError(
                f"could not place duct {len(placed) + 1}/{len(specs)} for {diagnosis} ROI"
            )
        placed.append((cx, cy, r))

        lumen_r = r * _sample(rng, p.lumen_frac)
        me = _sample(rng, p.hot_me if hot else p.cold_me)
        nc_prob = p.hot_necrosis_prob if hot else p.cold_necrosis_prob
        # fixed-mix rims at both epithelium boundaries keep ROI-level
        # boundary statistics independent of the hot/cold assignment
        _draw_ring_epithelium(labels, cx, cy, r, lumen_r, config.rim_me, rng)
        core_out = r - config.rim_width
        core_in = lumen_r + config.rim_width
        if core_out > core_in:
            _draw_ring_epithelium(labels, cx, cy, core_out, core_in, me, rng)
        _draw_disk(labels, cx, cy, lumen_r, int(TissueLabel.SC))
        if rng.random() < nc_prob:
            _draw_disk(labels, cx, cy, 0.35 * lumen_r, int(TissueLabel.NC))

        box = BoundingBox(
            int(np.floor(cx - r)) - 2, int(np.floor(cy - r)) - 2,
            int(np.ceil(2 * r)) + 5, int(np.ceil(2 * r)) + 5,
        ).clamped(size, size)
        boxes.append(box)

    # debris in the stroma, outside every annotation box (all classes):
    # secretion blobs with necrotic centers, or plain blood specks, so that
    # ROI-level NC and SC frequencies do not fingerprint any single class
    for _ in range(_sample_int(rng, config.debris_count)):
        r = _sample(rng, config.debris_radius)
        blood = rng.random() < 0.3
        for _ in range(config.placement_retries):
            cy = rng.uniform(iy0 + r + 1, iy1 - r - 1)
            cx = rng.uniform(ix0 + r + 1, ix1 - r - 1)
            if not any(_boxes_intersect(b, cx - r, cy - r, cx + r, cy + r) for b in boxes):
                if blood:
                    _draw_disk(labels, cx, cy, r, int(TissueLabel.BL))
                else:
                    _draw_disk(labels, cx, cy, r, int(TissueLabel.SC))
                    _draw_disk(labels, cx, cy, 0.6 * r, int(TissueLabel.NC))
                break

    # invasive pattern: malignant blobs escaped into the stroma
    n_scatter = _sample_int(rng, p.scatter_count)
    placed_scatter = 0
    for _ in range(n_scatter):
        r = _sample(rng, config.scatter_radius)
        for _ in range(config.placement_retries):
            cy = rng.uniform(iy0 + r + 1, iy1 - r - 1)
            cx = rng.uniform(ix0 + r + 1, ix1 - r - 1)
            if not any(_boxes_intersect(b, cx - r, cy - r, cx + r, cy + r) for b in boxes):
                _draw_disk(labels, cx, cy, r, int(TissueLabel.ME))
                placed_scatter += 1
                break
    if n_scatter > 0 and placed_scatter == 0:
        raise PlacementError(f"could not place any scatter blob for {diagnosis} ROI")

    if iy0 > 0:
        labels[:iy0, :] = int(TissueLabel.BG)
    if iy1 < size:
        labels[iy1:, :] = int(TissueLabel.BG)
    if ix0 > 0:
        labels[:, :ix0] = int(TissueLabel.BG)
    if ix1 < size:
        labels[:, ix1:] = int(TissueLabel.BG)

    return LabelRaster(labels), boxes


def _split_counts(n: int) -> tuple[int, int, int]:
    n_train = int(round(n * 0.6))
    n_val = int(round(n * 0.2))
    return n_train, n_val, n - n_train - n_val


def generate_dataset(out_dir, config: SynthConfig, per_class: int, seed: int) -> Path:
    """Write rasters, boxes and a stratified 60/20/20 manifest; returns manifest path.

    Byte-for-byte reproducible from the seed: every ROI draws from its own
    stream derived from (seed, class index, roi index).
    """
    out = Path(out_dir)
    (out / "rasters").mkdir(parents=True, exist_ok=True)
    (out / "boxes").mkdir(parents=True, exist_ok=True)
    records: list[RoiRecord] = []
    for ci, diagnosis in enumerate(DIAGNOSES):
        n_train, n_val, _ = _split_counts(per_class)
        for j in range(per_class):
            rng = derive_rng(seed, ci, j)
            raster, boxes = generate_roi(diagnosis, config, rng)
            roi_id = f"{diagnosis.lower()}_{j:03d}"
            raster_rel = f"rasters/{roi_id}.pgm"
            boxes_rel = f"boxes/{roi_id}.json"
            write_label_raster(raster, out / raster_rel)
            save_boxes(roi_id, boxes, out / boxes_rel)
            split = "train" if j < n_train else ("val" if j < n_train + n_val else "test")
            records.append(
                RoiRecord(id=roi_id, raster=raster_rel, boxes=boxes_rel,
                          diagnosis=diagnosis, split=split)
            )
    manifest = out / "manifest.json"
    save_manifest(records, manifest)
    return manifest
