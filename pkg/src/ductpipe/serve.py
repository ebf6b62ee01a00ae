"""Local HTTP service exposing instance derivation and feature endpoints.

JSON over HTTP on a local socket. Read-only against the dataset except for
PUT /boxes, the explicit annotation-save endpoint, whose writes are
serialized per ROI id. Previews are downsampled to at most 128 pixels per
side to keep payloads small.

Endpoints:
  GET  /health           -> {"status": "ok", "version": ...}
  GET  /boxes            -> {"rois": [ids...]}
  GET  /boxes?roi=ID     -> boxes document for the ROI
  PUT  /boxes?roi=ID     -> save a boxes document (body = document)
  GET  /mask?roi=ID      -> downsampled label grid + foreground bits
  POST /derive           -> {"roi", "boxes", "policy"?} -> instance summary + preview
  POST /features         -> {"roi", "boxes", "policy"?} -> per-duct feature vectors
"""

from __future__ import annotations

import json
import threading
from collections import defaultdict
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

import numpy as np

from . import __version__
from .features import _block_names, duct_features
from .instances import derive_instances_weak
from .raster import (
    BoundingBox,
    LabelRaster,
    binarize,
    load_boxes,
    load_manifest,
    read_label_raster,
    resize_nearest,
    save_boxes,
)

PREVIEW_MAX_SIDE = 128

BOX_LEVEL_NAMES = _block_names("duct box", include_bd=True)
MASK_LEVEL_NAMES = _block_names("duct mask", include_bd=True)


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


class ServeState:
    """Loaded dataset plus caches; rasters are immutable once loaded."""

    def __init__(self, dataset, policy: str = "smallest"):
        root = Path(dataset)
        manifest = root / "manifest.json" if root.is_dir() else root
        self.root = manifest.parent
        self.records = {rec.id: rec for rec in load_manifest(manifest)}
        self.policy = policy
        self._rasters: dict[str, LabelRaster] = {}
        self._cache_lock = threading.Lock()
        self._save_locks: defaultdict[str, threading.Lock] = defaultdict(threading.Lock)
        self._save_locks_guard = threading.Lock()

    def record(self, roi_id: str):
        if roi_id not in self.records:
            raise ApiError(404, f"unknown roi {roi_id!r}")
        return self.records[roi_id]

    def raster(self, roi_id: str) -> LabelRaster:
        rec = self.record(roi_id)
        with self._cache_lock:
            if roi_id not in self._rasters:
                self._rasters[roi_id] = read_label_raster(self.root / rec.raster)
            return self._rasters[roi_id]

    def save_lock(self, roi_id: str) -> threading.Lock:
        with self._save_locks_guard:
            return self._save_locks[roi_id]

    def boxes_path(self, roi_id: str) -> Path:
        rec = self.record(roi_id)
        if rec.boxes is not None:
            return self.root / rec.boxes
        return self.root / "boxes" / f"{roi_id}.json"


def _preview_scale(w: int, h: int) -> tuple[int, int]:
    scale = min(1.0, PREVIEW_MAX_SIDE / max(w, h))
    return max(1, round(w * scale)), max(1, round(h * scale))


def _downsample_grid(grid: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    h, w = grid.shape
    rows = np.minimum((np.arange(out_h) + 0.5) * h / out_h, h - 1).astype(np.int64)
    cols = np.minimum((np.arange(out_w) + 0.5) * w / out_w, w - 1).astype(np.int64)
    return grid[np.ix_(rows, cols)]


def _parse_boxes(doc, width: int, height: int) -> list[BoundingBox]:
    boxes = []
    for i, b in enumerate(doc):
        try:
            box = BoundingBox(int(b["x"]), int(b["y"]), int(b["w"]), int(b["h"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ApiError(400, f"box {i} malformed: {exc}")
        clamped = box.clamped(width, height)
        if clamped is not None:
            boxes.append(clamped)
    return boxes


def _derive(state: ServeState, body: dict):
    if "roi" not in body or "boxes" not in body:
        raise ApiError(400, "body must contain 'roi' and 'boxes'")
    raster = state.raster(str(body["roi"]))
    boxes = _parse_boxes(body["boxes"], raster.width, raster.height)
    policy = body.get("policy", state.policy)
    mask = binarize(raster)
    return raster, derive_instances_weak(mask, boxes, policy)


def handle_request(state: ServeState, method: str, path: str, query: dict, body) -> tuple[int, dict]:
    if method == "GET" and path == "/health":
        return 200, {"status": "ok", "version": __version__}

    if method == "GET" and path == "/boxes":
        roi = query.get("roi")
        if roi is None:
            return 200, {"rois": sorted(state.records)}
        rec = state.record(roi)
        boxes_path = state.boxes_path(roi)
        if not boxes_path.exists():
            return 200, {"image": roi, "boxes": []}
        raster = state.raster(roi)
        boxes = load_boxes(boxes_path, raster.width, raster.height)
        return 200, {
            "image": roi,
            "boxes": [{"x": b.x, "y": b.y, "w": b.w, "h": b.h} for b in boxes],
        }

    if method == "PUT" and path == "/boxes":
        roi = query.get("roi")
        if roi is None:
            raise ApiError(400, "roi query parameter required")
        state.record(roi)
        if not isinstance(body, dict) or "boxes" not in body:
            raise ApiError(400, "body must be a boxes document")
        raster = state.raster(roi)
        boxes = _parse_boxes(body["boxes"], raster.width, raster.height)
        with state.save_lock(roi):
            state.boxes_path(roi).parent.mkdir(parents=True, exist_ok=True)
            save_boxes(roi, boxes, state.boxes_path(roi))
        return 200, {"saved": len(boxes)}

    if method == "GET" and path == "/mask":
        roi = query.get("roi")
        if roi is None:
            raise ApiError(400, "roi query parameter required")
        raster = state.raster(roi)
        pw, ph = _preview_scale(raster.width, raster.height)
        small = resize_nearest(raster, pw, ph)
        bits = binarize(small)
        return 200, {
            "width": raster.width,
            "height": raster.height,
            "preview_width": pw,
            "preview_height": ph,
            "labels": small.labels.ravel().tolist(),
            "bits": bits.bits.ravel().astype(int).tolist(),
        }

    if method == "POST" and path == "/derive":
        raster, inst = _derive(state, body)
        pw, ph = _preview_scale(raster.width, raster.height)
        preview = _downsample_grid(inst.ids, pw, ph)
        return 200, {
            "count": len(inst),
            "instances": [
                {"id": i.id, "box": {"x": i.box.x, "y": i.box.y, "w": i.box.w, "h": i.box.h},
                 "area": i.area}
                for i in inst.instances
            ],
            "preview": {"width": pw, "height": ph, "ids": preview.ravel().tolist()},
        }

    if method == "POST" and path == "/features":
        raster, inst = _derive(state, body)
        box_vecs = duct_features(raster, inst, "box")
        mask_vecs = duct_features(raster, inst, "mask")
        return 200, {
            "box_names": BOX_LEVEL_NAMES,
            "mask_names": MASK_LEVEL_NAMES,
            "ducts": [
                {"id": info.id, "box": bv.tolist(), "mask": mv.tolist()}
                for info, bv, mv in zip(inst.instances, box_vecs, mask_vecs)
            ],
        }

    raise ApiError(404, f"no such endpoint: {method} {path}")


_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".json": "application/json",
    ".svg": "image/svg+xml",
}


def make_handler(state: ServeState, ui_dir):
    ui_root = Path(ui_dir).resolve() if ui_dir else None

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # quiet by default
            pass

        def _send(self, status: int, payload: bytes, content_type: str):
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(payload)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.end_headers()
            self.wfile.write(payload)

        def _send_json(self, status: int, doc: dict):
            self._send(status, json.dumps(doc).encode(), "application/json")

        def _read_body(self):
            length = int(self.headers.get("Content-Length") or 0)
            if length == 0:
                return None
            raw = self.rfile.read(length)
            try:
                return json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ApiError(400, f"invalid JSON body: {exc}")

        def _dispatch(self, method: str):
            url = urlparse(self.path)
            query = {k: v[0] for k, v in parse_qs(url.query).items()}
            try:
                body = self._read_body() if method in ("POST", "PUT") else None
                status, doc = handle_request(state, method, url.path, query, body)
                self._send_json(status, doc)
            except ApiError as exc:
                self._send_json(exc.status, {"error": str(exc)})
            except Exception as exc:  # processing failure
                self._send_json(500, {"error": f"{type(exc).__name__}: {exc}"})

        def do_GET(self):
            url = urlparse(self.path)
            if ui_root is not None and url.path not in ("/health", "/boxes", "/mask"):
                return self._serve_static(url.path)
            self._dispatch("GET")

        def do_POST(self):
            self._dispatch("POST")

        def do_PUT(self):
            self._dispatch("PUT")

        def do_OPTIONS(self):
            self._send(204, b"", "text/plain")

        def _serve_static(self, path: str):
            rel = path.lstrip("/") or "index.html"
            target = (ui_root / rel).resolve()
            if not str(target).startswith(str(ui_root)) or not target.is_file():
                return self._send_json(404, {"error": f"not found: {path}"})
            ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
            self._send(200, target.read_bytes(), ctype)

    return Handler


def make_server(dataset, host="127.0.0.1", port=0, ui_dir=None, policy="smallest"):
    state = ServeState(dataset, policy=policy)
    return ThreadingHTTPServer((host, port), make_handler(state, ui_dir))


def serve_forever(dataset, host="127.0.0.1", port=8077, ui_dir=None, policy="smallest"):
    server = make_server(dataset, host, port, ui_dir, policy)
    print(f"ductpipe serve listening on http://{host}:{server.server_address[1]}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
