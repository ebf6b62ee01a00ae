"""Tissue label rasters, binary masks, bounding boxes, and their on-disk formats.

Label rasters are stored as binary PGM (P5, maxval 255) with the pixel value
equal to the tissue code. Instance id rasters use PGM P5 with maxval 65535
(16-bit big-endian samples, 0 = no instance). Box annotations and dataset
manifests are JSON documents.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)


class TissueLabel(IntEnum):
    """The eight tissue classes. Codes are fixed; rasters store the code."""

    BG = 0  # background
    BE = 1  # benign epithelium
    ME = 2  # malignant epithelium
    NS = 3  # normal stroma
    DS = 4  # desmoplastic stroma
    SC = 5  # secretion
    BL = 6  # blood
    NC = 7  # necrosis


NUM_LABELS = 8

# Tissues that surround ducts; the default foreground set for binarization.
DEFAULT_FOREGROUND = frozenset(
    {TissueLabel.BE, TissueLabel.ME, TissueLabel.SC, TissueLabel.NC}
)

DIAGNOSES = ("Benign", "Atypia", "DCIS", "Invasive")
SPLITS = ("train", "val", "test", "unassigned")


class RasterFormatError(ValueError):
    """Raised when a raster file does not conform to the expected format."""


class LabelRangeError(RasterFormatError):
    """Raised when a raster contains a pixel value outside the label table."""


@dataclass(eq=False)
class LabelRaster:
    """2-D grid of tissue label codes, row-major, shape (height, width)."""

    labels: np.ndarray  # uint8, shape (h, w)

    def __post_init__(self):
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if self.labels.ndim != 2 or self.labels.shape[0] < 1 or self.labels.shape[1] < 1:
            raise ValueError(f"raster must be 2-D and non-empty, got shape {self.labels.shape}")
        bad = np.flatnonzero(self.labels >= NUM_LABELS)
        if bad.size:
            raise LabelRangeError(
                f"pixel value {int(self.labels.flat[bad[0]])} at index {int(bad[0])} "
                f"exceeds max label code {NUM_LABELS - 1}"
            )

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]


@dataclass(eq=False)
class BitMask:
    """Boolean raster with the same dimensions as its source LabelRaster."""

    bits: np.ndarray  # bool, shape (h, w)

    def __post_init__(self):
        self.bits = np.ascontiguousarray(self.bits, dtype=bool)
        if self.bits.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {self.bits.shape}")

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]


@dataclass(frozen=True)
class BoundingBox:
    """Pixel-aligned box; (x, y) is the top-left corner, inclusive."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError(f"box must be at least 1x1, got w={self.w} h={self.h}")

    @property
    def area(self) -> int:
        return self.w * self.h

    def clamped(self, width: int, height: int) -> "BoundingBox | None":
        """Intersect with raster bounds; None if nothing remains."""
        x0 = max(self.x, 0)
        y0 = max(self.y, 0)
        x1 = min(self.x + self.w, width)
        y1 = min(self.y + self.h, height)
        if x1 <= x0 or y1 <= y0:
            return None
        return BoundingBox(x0, y0, x1 - x0, y1 - y0)


@dataclass
class RoiRecord:
    """One manifest entry: paths plus diagnosis and split assignment."""

    id: str
    raster: str
    boxes: str | None = None
    diagnosis: str | None = None
    split: str = "unassigned"


# ---------------------------------------------------------------------------
# PGM I/O


def _read_pgm_header(data: bytes, path) -> tuple[int, int, int, int]:
    """Parse a P5 header; returns (width, height, maxval, data offset).

    Comment lines (starting '#') are permitted anywhere in the header
    whitespace after the magic.
    """
    if not data.startswith(b"P5"):
        raise RasterFormatError(f"{path}: not a P5 PGM file")
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise RasterFormatError(f"{path}: unterminated comment in header")
            pos = nl + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        token = data[start:pos]
        if not token.isdigit():
            raise RasterFormatError(f"{path}: malformed header token {token!r}")
        fields.append(int(token))
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise RasterFormatError(f"{path}: missing whitespace after maxval")
    pos += 1  # single whitespace byte separates header from samples
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise RasterFormatError(f"{path}: bad dimensions {width}x{height}")
    if maxval not in (255, 65535):
        raise RasterFormatError(f"{path}: unsupported maxval {maxval}")
    return width, height, maxval, pos


def _read_pgm(path) -> tuple[int, np.ndarray]:
    data = Path(path).read_bytes()
    width, height, maxval, offset = _read_pgm_header(data, path)
    dtype = np.dtype(np.uint8) if maxval == 255 else np.dtype(">u2")
    n = width * height
    body = data[offset : offset + n * dtype.itemsize]
    if len(body) != n * dtype.itemsize:
        raise RasterFormatError(f"{path}: truncated pixel data")
    grid = np.frombuffer(body, dtype=dtype).reshape(height, width)
    return maxval, grid


def read_label_raster(path) -> LabelRaster:
    """Read a tissue label raster (PGM P5, maxval 255)."""
    maxval, grid = _read_pgm(path)
    if maxval != 255:
        raise RasterFormatError(f"{path}: label raster must have maxval 255, got {maxval}")
    bad = np.flatnonzero(grid >= NUM_LABELS)
    if bad.size:
        raise LabelRangeError(
            f"{path}: pixel value {int(grid.flat[bad[0]])} at index {int(bad[0])} "
            f"exceeds max label code {NUM_LABELS - 1}"
        )
    return LabelRaster(grid.astype(np.uint8))


def write_label_raster(raster: LabelRaster, path) -> None:
    """Write a tissue label raster; read_label_raster round-trips bit-exactly."""
    header = f"P5\n{raster.width} {raster.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + raster.labels.tobytes())


def read_instance_raster(path) -> np.ndarray:
    """Read an instance id raster (PGM P5, maxval 65535) as int32, 0 = none."""
    maxval, grid = _read_pgm(path)
    if maxval != 65535:
        raise RasterFormatError(f"{path}: instance raster must have maxval 65535, got {maxval}")
    return grid.astype(np.int32)


def write_instance_raster(ids: np.ndarray, path) -> None:
    """Write an instance id raster as 16-bit big-endian PGM."""
    ids = np.asarray(ids)
    if ids.max(initial=0) > 65535:
        raise ValueError(f"instance id {int(ids.max())} exceeds 16-bit raster range")
    header = f"P5\n{ids.shape[1]} {ids.shape[0]}\n65535\n".encode("ascii")
    Path(path).write_bytes(header + ids.astype(">u2").tobytes())


# ---------------------------------------------------------------------------
# Pixel operations


def binarize(raster: LabelRaster, foreground=DEFAULT_FOREGROUND) -> BitMask:
    """Foreground mask: bit(p) true iff label(p) is in the foreground set."""
    table = np.zeros(NUM_LABELS, dtype=bool)
    for lab in foreground:
        table[int(lab)] = True
    return BitMask(table[raster.labels])


def resize_nearest(raster: LabelRaster, out_w: int, out_h: int) -> LabelRaster:
    """Nearest-neighbor resize with pixel-center sampling.

    Output pixel (i, j) samples input pixel
    (floor((i+0.5)*H/out_h), floor((j+0.5)*W/out_w)). Labels are categorical,
    so no interpolation.
    """
    if out_w < 1 or out_h < 1:
        raise ValueError(f"output dimensions must be >= 1, got {out_w}x{out_h}")
    h, w = raster.labels.shape
    rows = np.minimum((np.arange(out_h) + 0.5) * h / out_h, h - 1).astype(np.int64)
    cols = np.minimum((np.arange(out_w) + 0.5) * w / out_w, w - 1).astype(np.int64)
    return LabelRaster(raster.labels[np.ix_(rows, cols)])


# ---------------------------------------------------------------------------
# Box and manifest documents


def load_boxes(path, width: int, height: int) -> list[BoundingBox]:
    """Load a boxes document, clamping boxes to raster bounds.

    Boxes partially outside the raster are clamped with a warning; boxes
    empty after clamping are dropped.
    """
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict) or "boxes" not in doc:
        raise RasterFormatError(f"{path}: boxes document must contain a 'boxes' array")
    out: list[BoundingBox] = []
    for i, b in enumerate(doc["boxes"]):
        box = BoundingBox(int(b["x"]), int(b["y"]), int(b["w"]), int(b["h"]))
        clamped = box.clamped(width, height)
        if clamped is None:
            log.warning("%s: box %d lies fully outside the raster, dropped", path, i)
            continue
        if clamped != box:
            log.warning("%s: box %d clamped to raster bounds", path, i)
        out.append(clamped)
    return out


def save_boxes(image_id: str, boxes: list[BoundingBox], path) -> None:
    doc = {
        "image": image_id,
        "boxes": [{"x": b.x, "y": b.y, "w": b.w, "h": b.h} for b in boxes],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_manifest(path) -> list[RoiRecord]:
    records = json.loads(Path(path).read_text())
    out = []
    for rec in records:
        diagnosis = rec.get("diagnosis")
        if diagnosis is not None and diagnosis not in DIAGNOSES:
            raise ValueError(f"{path}: unknown diagnosis {diagnosis!r} for roi {rec.get('id')}")
        split = rec.get("split", "unassigned")
        if split not in SPLITS:
            raise ValueError(f"{path}: unknown split {split!r} for roi {rec.get('id')}")
        out.append(
            RoiRecord(
                id=str(rec["id"]),
                raster=rec["raster"],
                boxes=rec.get("boxes"),
                diagnosis=diagnosis,
                split=split,
            )
        )
    return out


def save_manifest(records: list[RoiRecord], path) -> None:
    doc = [
        {
            "id": r.id,
            "raster": r.raster,
            "boxes": r.boxes,
            "diagnosis": r.diagnosis,
            "split": r.split,
        }
        for r in records
    ]
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
