"""Duct instance maps: derivation from masks/boxes and comparison metrics.

Two derivation routes are provided: the classic morphology + connected
components baseline, and the weakly-supervised combination of annotation
boxes with a foreground mask. Both produce the same InstanceMap type, so
externally produced instance rasters can be dropped in as well.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .raster import BitMask, BoundingBox, read_instance_raster, write_instance_raster

ASSIGNMENT_POLICIES = ("smallest", "nearest-center", "first")


@dataclass(frozen=True)
class InstanceInfo:
    id: int
    box: BoundingBox  # tight bounding box of the instance pixels
    area: int


@dataclass(eq=False)
class InstanceMap:
    """Per-pixel duct instance ids (0 = background) plus per-instance summaries."""

    ids: np.ndarray  # int32, shape (h, w)
    instances: list[InstanceInfo]

    def __post_init__(self):
        self.ids = np.ascontiguousarray(self.ids, dtype=np.int32)

    @property
    def width(self) -> int:
        return self.ids.shape[1]

    @property
    def height(self) -> int:
        return self.ids.shape[0]

    def __len__(self) -> int:
        return len(self.instances)


def summarize_ids(ids: np.ndarray) -> InstanceMap:
    """Build an InstanceMap from an id grid by measuring boxes and areas."""
    ids = np.ascontiguousarray(ids, dtype=np.int32)
    instances = []
    present = np.unique(ids)
    for inst_id in present[present > 0]:
        rows, cols = np.nonzero(ids == inst_id)
        box = BoundingBox(
            int(cols.min()), int(rows.min()),
            int(cols.max() - cols.min() + 1), int(rows.max() - rows.min() + 1),
        )
        instances.append(InstanceInfo(int(inst_id), box, int(rows.size)))
    return InstanceMap(ids, instances)


# ---------------------------------------------------------------------------
# Morphology


def _dilate(bits: np.ndarray, radius: int) -> np.ndarray:
    # square structuring element is separable: max over rows, then columns
    out = bits
    for axis in (0, 1):
        padded = np.zeros(
            (out.shape[0] + (2 * radius if axis == 0 else 0),
             out.shape[1] + (2 * radius if axis == 1 else 0)), dtype=bool)
        acc = np.zeros_like(out)
        for off in range(2 * radius + 1):
            if axis == 0:
                padded[off : off + out.shape[0], :] = out
                acc |= padded[radius : radius + out.shape[0], :]
                padded[off : off + out.shape[0], :] = False
            else:
                padded[:, off : off + out.shape[1]] = out
                acc |= padded[:, radius : radius + out.shape[1]]
                padded[:, off : off + out.shape[1]] = False
        out = acc
    return out


def _erode_border_true(bits: np.ndarray, radius: int) -> np.ndarray:
    # outside-of-image counts as foreground so that closing stays extensive
    padded = np.pad(bits, radius, constant_values=True)
    out = np.ones_like(bits)
    h, w = bits.shape
    for dr in range(2 * radius + 1):
        for dc in range(2 * radius + 1):
            out &= padded[dr : dr + h, dc : dc + w]
    return out


def morphological_close(mask: BitMask, radius: int) -> BitMask:
    """Dilation then erosion with a (2r+1)x(2r+1) square element.

    Pixels outside the image count as background for dilation and as
    foreground for erosion, which keeps closing a superset of the input.
    Radius 0 is the identity.
    """
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    if radius == 0:
        return BitMask(mask.bits.copy())
    return BitMask(_erode_border_true(_dilate(mask.bits, radius), radius))


# ---------------------------------------------------------------------------
# Connected components (union-find)


def _find(parent: np.ndarray, i: int) -> int:
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:  # path compression
        parent[i], i = root, parent[i]
    return root


def connected_components(mask: BitMask, connectivity: int = 4, min_area: int = 0) -> InstanceMap:
    """Label connected foreground regions with union-find.

    Components with fewer than min_area pixels are removed. Surviving
    components get ids 1..N in raster-scan order of each component's first
    pixel.
    """
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    bits = mask.bits
    h, w = bits.shape
    flat = bits.ravel()
    n = flat.size
    parent = np.arange(n, dtype=np.int64)

    # adjacent foreground pairs, expressed in flat indices
    pairs = []
    both = bits[:, :-1] & bits[:, 1:]
    r, c = np.nonzero(both)
    pairs.append((r * w + c, r * w + c + 1))
    both = bits[:-1, :] & bits[1:, :]
    r, c = np.nonzero(both)
    pairs.append((r * w + c, (r + 1) * w + c))
    if connectivity == 8:
        both = bits[:-1, :-1] & bits[1:, 1:]
        r, c = np.nonzero(both)
        pairs.append((r * w + c, (r + 1) * w + c + 1))
        both = bits[:-1, 1:] & bits[1:, :-1]
        r, c = np.nonzero(both)
        pairs.append((r * w + c + 1, (r + 1) * w + c))

    for a_arr, b_arr in pairs:
        for a, b in zip(a_arr.tolist(), b_arr.tolist()):
            ra, rb = _find(parent, a), _find(parent, b)
            if ra != rb:
                if ra < rb:  # root = smallest flat index = first pixel in scan order
                    parent[rb] = ra
                else:
                    parent[ra] = rb

    ids = np.zeros(n, dtype=np.int32)
    next_id = 1
    root_to_id: dict[int, int] = {}
    fg = np.flatnonzero(flat)
    roots = np.empty(fg.size, dtype=np.int64)
    for k, p in enumerate(fg.tolist()):
        roots[k] = _find(parent, p)
    areas = np.zeros(n, dtype=np.int64)
    np.add.at(areas, roots, 1)
    for k, p in enumerate(fg.tolist()):
        root = roots[k]
        if areas[root] < min_area:
            continue
        if root not in root_to_id:  # fg is in scan order, so ids follow first pixels
            root_to_id[root] = next_id
            next_id += 1
        ids[p] = root_to_id[root]
    return summarize_ids(ids.reshape(h, w))


# ---------------------------------------------------------------------------
# Weakly-supervised derivation


def derive_instances_weak(
    mask: BitMask, boxes: list[BoundingBox], policy: str = "smallest"
) -> InstanceMap:
    """Assign each in-box foreground pixel to one annotation box.

    Default policy gives a pixel covered by several boxes to the
    smallest-area box, ties broken by lowest box index. Boxes with an empty
    mask intersection yield no instance; ids follow input box order among
    the non-empty boxes.
    """
    if policy not in ASSIGNMENT_POLICIES:
        raise ValueError(f"unknown policy {policy!r}, expected one of {ASSIGNMENT_POLICIES}")
    h, w = mask.bits.shape
    best_score = np.full((h, w), np.inf)
    chosen = np.full((h, w), -1, dtype=np.int64)
    for idx, box in enumerate(boxes):
        b = box.clamped(w, h)
        if b is None:
            continue
        sl = (slice(b.y, b.y + b.h), slice(b.x, b.x + b.w))
        if policy == "smallest":
            score = np.full((b.h, b.w), float(box.area))
        elif policy == "first":
            score = np.full((b.h, b.w), float(idx))
        else:  # nearest-center: squared distance from pixel center to box center
            cy = box.y + box.h / 2.0
            cx = box.x + box.w / 2.0
            yy = np.arange(b.y, b.y + b.h) + 0.5
            xx = np.arange(b.x, b.x + b.w) + 0.5
            score = (yy[:, None] - cy) ** 2 + (xx[None, :] - cx) ** 2
        take = mask.bits[sl] & (score < best_score[sl])  # strict: earlier box wins ties
        best_score[sl] = np.where(take, score, best_score[sl])
        chosen[sl] = np.where(take, idx, chosen[sl])

    # renumber non-empty boxes 1..K in input order
    used = np.unique(chosen)
    used = used[used >= 0]
    remap = np.zeros(len(boxes) + 1, dtype=np.int32)
    for new_id, box_idx in enumerate(sorted(used.tolist()), start=1):
        remap[box_idx + 1] = new_id
    ids = remap[chosen + 1]
    return summarize_ids(ids)


# ---------------------------------------------------------------------------
# Instance map comparison


@dataclass
class MatchReport:
    mean_iou: float
    matched_pairs: list[tuple[int, int, float]]
    unmatched_a: int
    unmatched_b: int


def match_instances(a: InstanceMap, b: InstanceMap, iou_threshold: float = 0.5) -> MatchReport:
    """Greedy one-to-one matching of instances in descending pairwise IoU."""
    if a.ids.shape != b.ids.shape:
        raise ValueError(f"dimension mismatch: {a.ids.shape} vs {b.ids.shape}")
    area_a = {inst.id: inst.area for inst in a.instances}
    area_b = {inst.id: inst.area for inst in b.instances}

    both = (a.ids > 0) & (b.ids > 0)
    keys = a.ids[both].astype(np.int64) * (b.ids.max(initial=0) + 1) + b.ids[both]
    uniq, counts = np.unique(keys, return_counts=True)
    nb = int(b.ids.max(initial=0)) + 1
    candidates = []
    for key, inter in zip(uniq.tolist(), counts.tolist()):
        ia, ib = key // nb, key % nb
        iou = inter / (area_a[ia] + area_b[ib] - inter)
        candidates.append((ia, ib, iou))
    candidates.sort(key=lambda t: (-t[2], t[0], t[1]))

    matched_a: set[int] = set()
    matched_b: set[int] = set()
    pairs: list[tuple[int, int, float]] = []
    for ia, ib, iou in candidates:
        if iou < iou_threshold or ia in matched_a or ib in matched_b:
            continue
        matched_a.add(ia)
        matched_b.add(ib)
        pairs.append((ia, ib, iou))
    mean_iou = float(np.mean([p[2] for p in pairs])) if pairs else 0.0
    return MatchReport(
        mean_iou=mean_iou,
        matched_pairs=pairs,
        unmatched_a=len(area_a) - len(matched_a),
        unmatched_b=len(area_b) - len(matched_b),
    )


# ---------------------------------------------------------------------------
# Persistence: 16-bit instance raster + sidecar summary document


def save_instance_map(inst: InstanceMap, raster_path, sidecar_path) -> None:
    write_instance_raster(inst.ids, raster_path)
    doc = {
        "instances": [
            {"id": i.id, "box": {"x": i.box.x, "y": i.box.y, "w": i.box.w, "h": i.box.h},
             "area": i.area}
            for i in inst.instances
        ]
    }
    Path(sidecar_path).write_text(json.dumps(doc, indent=2) + "\n")


def load_instance_map(raster_path) -> InstanceMap:
    """Rebuild an InstanceMap (summaries included) from an instance raster."""
    return summarize_ids(read_instance_raster(raster_path))
