import numpy as np
import pytest

from ductpipe.raster import (
    DEFAULT_FOREGROUND,
    BoundingBox,
    LabelRangeError,
    LabelRaster,
    RasterFormatError,
    RoiRecord,
    TissueLabel,
    binarize,
    load_boxes,
    load_manifest,
    read_instance_raster,
    read_label_raster,
    resize_nearest,
    save_boxes,
    save_manifest,
    write_instance_raster,
    write_label_raster,
)


def write_raw_pgm(path, width, height, maxval, payload: bytes, comment=None):
    header = b"P5\n"
    if comment:
        header += b"# " + comment + b"\n"
    header += f"{width} {height}\n{maxval}\n".encode()
    path.write_bytes(header + payload)


class TestReadLabelRaster:
    def test_minimal_1x1(self, tmp_path):
        p = tmp_path / "a.pgm"
        write_raw_pgm(p, 1, 1, 255, bytes([0]))
        r = read_label_raster(p)
        assert (r.width, r.height) == (1, 1)
        assert r.labels[0, 0] == TissueLabel.BG

    def test_2x2_mapping(self, tmp_path):
        p = tmp_path / "a.pgm"
        write_raw_pgm(p, 2, 2, 255, bytes([1, 1, 2, 3]))
        r = read_label_raster(p)
        assert r.labels.ravel().tolist() == [
            TissueLabel.BE, TissueLabel.BE, TissueLabel.ME, TissueLabel.NS,
        ]

    def test_out_of_range_pixel_reports_offset(self, tmp_path):
        p = tmp_path / "a.pgm"
        write_raw_pgm(p, 2, 2, 255, bytes([0, 1, 8, 2]))
        with pytest.raises(LabelRangeError, match="index 2"):
            read_label_raster(p)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "a.pgm"
        p.write_bytes(b"P6\n1 1\n255\n\x00")
        with pytest.raises(RasterFormatError):
            read_label_raster(p)

    def test_comment_lines_allowed(self, tmp_path):
        p = tmp_path / "a.pgm"
        write_raw_pgm(p, 2, 1, 255, bytes([3, 4]), comment=b"made by hand")
        assert read_label_raster(p).labels.tolist() == [[3, 4]]

    def test_truncated_data(self, tmp_path):
        p = tmp_path / "a.pgm"
        write_raw_pgm(p, 4, 4, 255, bytes([0] * 7))
        with pytest.raises(RasterFormatError, match="truncated"):
            read_label_raster(p)


class TestWriteLabelRaster:
    def test_round_trip_random(self, tmp_path):
        rng = np.random.default_rng(5)
        for i in range(20):
            r = LabelRaster(rng.integers(0, 8, size=(64, 64), dtype=np.uint8))
            p = tmp_path / f"r{i}.pgm"
            write_label_raster(r, p)
            back = read_label_raster(p)
            assert np.array_equal(back.labels, r.labels)

    def test_round_trip_1x1(self, tmp_path):
        r = LabelRaster(np.zeros((1, 1), dtype=np.uint8))
        p = tmp_path / "one.pgm"
        write_label_raster(r, p)
        assert np.array_equal(read_label_raster(p).labels, r.labels)

    def test_unwritable_path(self, tmp_path):
        r = LabelRaster(np.zeros((1, 1), dtype=np.uint8))
        with pytest.raises(OSError):
            write_label_raster(r, tmp_path / "missing_dir" / "x.pgm")


class TestInstanceRaster:
    def test_round_trip_16bit(self, tmp_path):
        rng = np.random.default_rng(0)
        ids = rng.integers(0, 300, size=(32, 32)).astype(np.int32)
        p = tmp_path / "inst.pgm"
        write_instance_raster(ids, p)
        assert np.array_equal(read_instance_raster(p), ids)

    def test_id_too_large(self, tmp_path):
        with pytest.raises(ValueError, match="16-bit"):
            write_instance_raster(np.array([[70000]]), tmp_path / "x.pgm")

    def test_label_reader_rejects_16bit(self, tmp_path):
        p = tmp_path / "inst.pgm"
        write_instance_raster(np.array([[1]]), p)
        with pytest.raises(RasterFormatError, match="maxval"):
            read_label_raster(p)


class TestBinarize:
    def test_all_background(self):
        r = LabelRaster(np.zeros((4, 4), dtype=np.uint8))
        assert not binarize(r).bits.any()

    def test_default_foreground_positions(self):
        # [BE,NS,ME; SC,DS,NC; BG,BL,BE] -> true at flat positions {0,2,3,5,8}
        r = LabelRaster(np.array([[1, 3, 2], [5, 4, 7], [0, 6, 1]], dtype=np.uint8))
        got = sorted(np.flatnonzero(binarize(r).bits.ravel()).tolist())
        assert got == [0, 2, 3, 5, 8]

    def test_universal_foreground(self):
        rng = np.random.default_rng(1)
        r = LabelRaster(rng.integers(0, 8, size=(8, 8), dtype=np.uint8))
        assert binarize(r, frozenset(TissueLabel)).bits.all()

    def test_idempotent_effect(self):
        rng = np.random.default_rng(2)
        r = LabelRaster(rng.integers(0, 8, size=(16, 16), dtype=np.uint8))
        a = binarize(r, DEFAULT_FOREGROUND)
        b = binarize(r, DEFAULT_FOREGROUND)
        assert np.array_equal(a.bits, b.bits)


class TestResizeNearest:
    def test_identity(self):
        rng = np.random.default_rng(3)
        r = LabelRaster(rng.integers(0, 8, size=(10, 7), dtype=np.uint8))
        assert np.array_equal(resize_nearest(r, 7, 10).labels, r.labels)

    def test_2x2_to_4x4_quadrants(self):
        r = LabelRaster(np.array([[1, 2], [3, 4]], dtype=np.uint8))
        out = resize_nearest(r, 4, 4).labels
        # evaluate floor((i+0.5)*2/4) at all positions: each label fills a quadrant
        expect = np.array([
            [1, 1, 2, 2],
            [1, 1, 2, 2],
            [3, 3, 4, 4],
            [3, 3, 4, 4],
        ], dtype=np.uint8)
        assert np.array_equal(out, expect)

    def test_uniform_input(self):
        r = LabelRaster(np.full((5, 5), 1, dtype=np.uint8))
        assert (resize_nearest(r, 13, 3).labels == 1).all()

    def test_never_introduces_labels(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            h, w = rng.integers(1, 20, size=2)
            r = LabelRaster(rng.integers(0, 8, size=(h, w), dtype=np.uint8))
            ow, oh = rng.integers(1, 30, size=2)
            out = resize_nearest(r, int(ow), int(oh))
            assert set(np.unique(out.labels)) <= set(np.unique(r.labels))

    def test_bad_dimensions(self):
        r = LabelRaster(np.zeros((2, 2), dtype=np.uint8))
        with pytest.raises(ValueError):
            resize_nearest(r, 0, 4)


class TestBoxesDocument:
    def test_round_trip(self, tmp_path):
        boxes = [BoundingBox(0, 0, 5, 5), BoundingBox(3, 7, 2, 1)]
        p = tmp_path / "b.json"
        save_boxes("roi1", boxes, p)
        assert load_boxes(p, 20, 20) == boxes

    def test_clamped_with_warning(self, tmp_path, caplog):
        p = tmp_path / "b.json"
        save_boxes("roi1", [BoundingBox(-2, -2, 6, 6)], p)
        with caplog.at_level("WARNING"):
            out = load_boxes(p, 10, 10)
        assert out == [BoundingBox(0, 0, 4, 4)]
        assert "clamped" in caplog.text

    def test_fully_outside_dropped(self, tmp_path, caplog):
        p = tmp_path / "b.json"
        save_boxes("roi1", [BoundingBox(50, 50, 3, 3)], p)
        with caplog.at_level("WARNING"):
            assert load_boxes(p, 10, 10) == []

    def test_zero_size_box_rejected(self):
        with pytest.raises(ValueError):
            BoundingBox(0, 0, 0, 3)


class TestManifest:
    def test_round_trip(self, tmp_path):
        records = [
            RoiRecord(id="a", raster="rasters/a.pgm", boxes="boxes/a.json",
                      diagnosis="DCIS", split="train"),
            RoiRecord(id="b", raster="rasters/b.pgm", boxes=None,
                      diagnosis="Benign", split="test"),
        ]
        p = tmp_path / "manifest.json"
        save_manifest(records, p)
        assert load_manifest(p) == records

    def test_unknown_diagnosis(self, tmp_path):
        p = tmp_path / "manifest.json"
        p.write_text('[{"id":"a","raster":"a.pgm","diagnosis":"Weird","split":"train"}]')
        with pytest.raises(ValueError, match="diagnosis"):
            load_manifest(p)

    def test_unknown_split(self, tmp_path):
        p = tmp_path / "manifest.json"
        p.write_text('[{"id":"a","raster":"a.pgm","diagnosis":"DCIS","split":"dev"}]')
        with pytest.raises(ValueError, match="split"):
            load_manifest(p)
