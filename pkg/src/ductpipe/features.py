"""Three-level histogram and co-occurrence features over tissue label rasters.

One fixed-length vector per ROI: tissue frequencies plus normalized
co-occurrence frequencies at the whole-ROI level, averaged duct-box level,
and averaged duct-mask level. Box- and mask-level co-occurrence adds the BD
(boundary of ducts) pseudo-label for neighbor visits that leave the region.

Event rule: for every region pixel p and each of its 4 grid neighbors q,
an in-region q records the unordered label pair {label(p), label(q)} (so an
internal adjacency is counted from both ends), and an out-of-region q
(including out of image) records {label(p), BD} once. Frequencies are event
counts over the total event count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .instances import InstanceMap
from .raster import NUM_LABELS, BoundingBox, LabelRaster, TissueLabel

BD_INDEX = NUM_LABELS  # storage index of the boundary pseudo-label
_N = NUM_LABELS + 1  # 9 labels including BD

LEVELS = ("ROI", "duct box", "duct mask")
AGGREGATION_POLICIES = ("mean", "area_weighted")

# Naming order puts BD ahead of the tissue labels ("BD & BE", never "BE & BD").
_NAMING_ORDER = (BD_INDEX,) + tuple(range(NUM_LABELS))
_LABEL_NAMES = {i: TissueLabel(i).name for i in range(NUM_LABELS)}
_LABEL_NAMES[BD_INDEX] = "BD"


def _pair_slots(include_bd: bool) -> list[tuple[int, int]]:
    """Canonical (storage_i <= storage_j) pair order for the normalized vector."""
    order = _NAMING_ORDER if include_bd else _NAMING_ORDER[1:]
    slots = []
    for a in range(len(order)):
        for b in range(a, len(order)):
            i, j = order[a], order[b]
            slots.append((min(i, j), max(i, j)))
    return slots


_PAIRS_BD = _pair_slots(include_bd=True)  # 45 slots
_PAIRS_NOBD = _pair_slots(include_bd=False)  # 36 slots


def _block_names(level: str, include_bd: bool) -> list[str]:
    names = [f"{_LABEL_NAMES[i]} freq in {level}" for i in range(NUM_LABELS)]
    order = _NAMING_ORDER if include_bd else _NAMING_ORDER[1:]
    for a in range(len(order)):
        for b in range(a, len(order)):
            names.append(f"{_LABEL_NAMES[order[a]]} & {_LABEL_NAMES[order[b]]} in {level}")
    return names


FEATURE_NAMES: tuple[str, ...] = tuple(
    _block_names("ROI", include_bd=False)
    + _block_names("duct box", include_bd=True)
    + _block_names("duct mask", include_bd=True)
)
ROI_BLOCK = slice(0, 44)
BOX_BLOCK = slice(44, 97)
MASK_BLOCK = slice(97, 150)
NUM_FEATURES = len(FEATURE_NAMES)  # 150

DUCT_COUNT_NAME = "duct count"


def feature_level(name: str) -> str:
    """Level tag of a canonical feature name ('ROI', 'duct box', 'duct mask')."""
    for level in ("duct box", "duct mask", "ROI"):
        if name.endswith(f"in {level}"):
            return level
    raise ValueError(f"not a canonical feature name: {name!r}")


class EmptyRegionError(ValueError):
    """Raised when features are requested over a region with no pixels."""


@dataclass(eq=False)
class Region:
    """A pixel region: the whole raster, a box interior, or an instance mask.

    The window (x0, y0, w, h) tightly contains all member pixels; member is
    a boolean grid over the window, or None when every window pixel belongs.
    """

    kind: str
    x0: int
    y0: int
    w: int
    h: int
    member: np.ndarray | None = None

    @classmethod
    def whole(cls, raster: LabelRaster) -> "Region":
        return cls("roi", 0, 0, raster.width, raster.height)

    @classmethod
    def box(cls, bbox: BoundingBox) -> "Region":
        return cls("box", bbox.x, bbox.y, bbox.w, bbox.h)

    @classmethod
    def instance(cls, inst_map: InstanceMap, inst_id: int) -> "Region":
        for info in inst_map.instances:
            if info.id == inst_id:
                b = info.box
                member = inst_map.ids[b.y : b.y + b.h, b.x : b.x + b.w] == inst_id
                return cls("mask", b.x, b.y, b.w, b.h, member)
        raise EmptyRegionError(f"instance id {inst_id} not present in map")

    def window(self, raster: LabelRaster) -> np.ndarray:
        return raster.labels[self.y0 : self.y0 + self.h, self.x0 : self.x0 + self.w]

    @property
    def pixel_count(self) -> int:
        if self.member is None:
            return self.w * self.h
        return int(self.member.sum())


def histogram_features(raster: LabelRaster, region: Region) -> np.ndarray:
    """Per-label pixel frequencies over the region; entries sum to 1."""
    window = region.window(raster)
    vals = window.ravel() if region.member is None else window[region.member]
    if vals.size == 0:
        raise EmptyRegionError(f"empty {region.kind} region")
    return np.bincount(vals, minlength=NUM_LABELS) / vals.size


@dataclass(eq=False)
class CooccurrenceMatrix:
    """Neighbor-event counts over 8 tissue labels + BD.

    counts is symmetric; normalized holds upper-triangle-with-diagonal
    frequencies (storage order, BD last) summing to 1, or all zeros when the
    region produced no events.
    """

    counts: np.ndarray  # int64, 9x9, symmetric
    normalized: np.ndarray  # float64, 9x9, upper triangle populated

    def vector(self, include_bd: bool) -> np.ndarray:
        slots = _PAIRS_BD if include_bd else _PAIRS_NOBD
        return np.array([self.normalized[i, j] for i, j in slots])


def _event_counts(window: np.ndarray, member: np.ndarray | None, include_bd: bool) -> np.ndarray:
    """Upper-triangle event counts (storage order); internal pairs count twice."""
    events = np.zeros(_N * _N, dtype=np.int64)
    h, w = window.shape

    def add_internal(a: np.ndarray, b: np.ndarray) -> None:
        lo = np.minimum(a, b).astype(np.int64)
        hi = np.maximum(a, b).astype(np.int64)
        events[: _N * _N] += 2 * np.bincount(lo * _N + hi, minlength=_N * _N)

    if member is None:
        if w > 1:
            add_internal(window[:, :-1].ravel(), window[:, 1:].ravel())
        if h > 1:
            add_internal(window[:-1, :].ravel(), window[1:, :].ravel())
        if include_bd:
            edges = np.concatenate([window[0, :], window[-1, :], window[:, 0], window[:, -1]])
            bd = np.bincount(edges.astype(np.int64), minlength=NUM_LABELS)
            events[np.arange(NUM_LABELS) * _N + BD_INDEX] += bd
    else:
        if w > 1:
            both = member[:, :-1] & member[:, 1:]
            add_internal(window[:, :-1][both], window[:, 1:][both])
        if h > 1:
            both = member[:-1, :] & member[1:, :]
            add_internal(window[:-1, :][both], window[1:, :][both])
        if include_bd:
            padded = np.pad(member, 1, constant_values=False)
            inside = (
                padded[:-2, 1:-1].astype(np.int64) + padded[2:, 1:-1]
                + padded[1:-1, :-2] + padded[1:-1, 2:]
            )
            bd_per_pixel = (4 - inside)[member]
            labs = window[member].astype(np.int64)
            bd = np.bincount(labs, weights=bd_per_pixel, minlength=NUM_LABELS)
            events[np.arange(NUM_LABELS) * _N + BD_INDEX] += bd.astype(np.int64)
    return events.reshape(_N, _N)


def cooccurrence_features(
    raster: LabelRaster, region: Region, include_bd: bool
) -> CooccurrenceMatrix:
    """Co-occurrence event frequencies over the region (see module docstring)."""
    if region.pixel_count == 0:
        raise EmptyRegionError(f"empty {region.kind} region")
    upper = _event_counts(region.window(raster), region.member, include_bd)
    counts = upper + np.triu(upper, 1).T
    total = upper.sum()
    normalized = upper / total if total > 0 else np.zeros_like(upper, dtype=float)
    return CooccurrenceMatrix(counts=counts, normalized=normalized)


def roi_features(raster: LabelRaster) -> np.ndarray:
    """Whole-raster block: 8 frequencies + 36 co-occurrence entries, no BD."""
    region = Region.whole(raster)
    hist = histogram_features(raster, region)
    cooc = cooccurrence_features(raster, region, include_bd=False)
    return np.concatenate([hist, cooc.vector(include_bd=False)])


def duct_features(raster: LabelRaster, inst: InstanceMap, level: str) -> list[np.ndarray]:
    """One 53-vector per instance over its box interior or its pixel set."""
    if level not in ("box", "mask"):
        raise ValueError(f"level must be 'box' or 'mask', got {level!r}")
    out = []
    for info in inst.instances:
        if level == "box":
            region = Region.box(info.box)
        else:
            b = info.box
            member = inst.ids[b.y : b.y + b.h, b.x : b.x + b.w] == info.id
            region = Region("mask", b.x, b.y, b.w, b.h, member)
        hist = histogram_features(raster, region)
        cooc = cooccurrence_features(raster, region, include_bd=True)
        out.append(np.concatenate([hist, cooc.vector(include_bd=True)]))
    return out


@dataclass(eq=False)
class FeatureVector:
    """The 150-entry ROI feature vector plus the duct count carried alongside."""

    values: np.ndarray
    duct_count: int
    names: tuple[str, ...] = field(default=FEATURE_NAMES)


def aggregate_features(
    roi_vec: np.ndarray,
    per_duct_box: list[np.ndarray],
    per_duct_mask: list[np.ndarray],
    policy: str = "mean",
    areas: list[int] | None = None,
) -> FeatureVector:
    """Pool per-duct vectors into the fixed 150-entry ROI vector.

    Zero ducts leave the box and mask blocks all-zero with duct_count 0.
    """
    if policy not in AGGREGATION_POLICIES:
        raise ValueError(f"unknown aggregation policy {policy!r}")
    if len(per_duct_box) != len(per_duct_mask):
        raise ValueError("box and mask duct lists must have equal length")
    n_ducts = len(per_duct_box)

    def pool(vectors: list[np.ndarray]) -> np.ndarray:
        if not vectors:
            return np.zeros(53)
        stacked = np.stack(vectors)
        if policy == "mean":
            return stacked.mean(axis=0)
        if areas is None or len(areas) != n_ducts:
            raise ValueError("area_weighted aggregation requires per-duct areas")
        weights = np.asarray(areas, dtype=float)
        return (stacked * weights[:, None]).sum(axis=0) / weights.sum()

    values = np.concatenate([np.asarray(roi_vec, dtype=float), pool(per_duct_box), pool(per_duct_mask)])
    return FeatureVector(values=values, duct_count=n_ducts)


def extract_feature_vector(
    raster: LabelRaster, inst: InstanceMap, policy: str = "mean"
) -> FeatureVector:
    """Full three-level extraction for one ROI."""
    return aggregate_features(
        roi_features(raster),
        duct_features(raster, inst, "box"),
        duct_features(raster, inst, "mask"),
        policy=policy,
        areas=[info.area for info in inst.instances],
    )


# ---------------------------------------------------------------------------
# Feature table persistence (delimited text, full decimal precision)


def write_feature_table(rows, path) -> None:
    """rows: iterable of (roi_id, diagnosis, FeatureVector)."""
    lines = ["roi_id,diagnosis,duct_count," + ",".join(f'"{n}"' for n in FEATURE_NAMES)]
    for roi_id, diagnosis, fv in rows:
        vals = ",".join(repr(float(v)) for v in fv.values)
        lines.append(f"{roi_id},{diagnosis},{fv.duct_count},{vals}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_feature_table(path):
    """Returns (roi_ids, diagnoses, duct_counts, X, names)."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = lines[0].split(",", 3)
    if header[:3] != ["roi_id", "diagnosis", "duct_count"]:
        raise ValueError(f"{path}: unexpected feature table header")
    names = tuple(n.strip('"') for n in _split_quoted(lines[0])[3:])
    ids, diagnoses, counts, rows = [], [], [], []
    for ln in lines[1:]:
        parts = ln.split(",", 3)
        ids.append(parts[0])
        diagnoses.append(parts[1])
        counts.append(int(parts[2]))
        rows.append(np.array([float(v) for v in parts[3].split(",")]))
    X = np.stack(rows) if rows else np.zeros((0, len(names)))
    return ids, diagnoses, np.array(counts), X, names


def _split_quoted(line: str) -> list[str]:
    """Split a header line on commas outside double quotes."""
    out, cur, quoted = [], [], False
    for ch in line:
        if ch == '"':
            quoted = not quoted
            cur.append(ch)
        elif ch == "," and not quoted:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur))
    return out
