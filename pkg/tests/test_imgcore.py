import numpy as np
import pytest
from PIL import Image

from tryon3d.imgcore import (
    DepthMap,
    GrayImage,
    LabelMap,
    MaskImage,
    RgbImage,
    bilinear_sample,
    load_depth,
    load_image,
    load_labels,
    load_mask,
    save_depth,
    save_image,
    save_labels,
    save_mask,
    to_gray,
)


def test_load_image_byte_mapping(tmp_path):
    raw = np.array([[[255, 0, 0], [0, 0, 0]]], dtype=np.uint8)
    path = tmp_path / "two.png"
    Image.fromarray(raw, mode="RGB").save(path)
    img = load_image(path)
    assert img.width == 2 and img.height == 1
    assert np.array_equal(img.data[0, 0], [1.0, 0.0, 0.0])
    assert np.array_equal(img.data[0, 1], [0.0, 0.0, 0.0])


def test_png_round_trip_exact(tmp_path):
    rng = np.random.default_rng(0)
    img = RgbImage(np.rint(rng.uniform(0, 1, (13, 17, 3)) * 255.0) / 255.0)
    path = tmp_path / "rt.png"
    save_image(img, path)
    assert np.array_equal(load_image(path).data, img.data)


def test_load_image_truncated_file(tmp_path):
    path = tmp_path / "trunc.png"
    whole = tmp_path / "whole.png"
    save_image(RgbImage(np.zeros((8, 8, 3))), whole)
    path.write_bytes(whole.read_bytes()[:40])
    with pytest.raises(ValueError, match="malformed PNG"):
        load_image(path)


def test_load_image_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_image(tmp_path / "nope.png")


def test_load_image_16bit_gray(tmp_path):
    arr = np.array([[0, 32768, 65535]], dtype=np.uint16)
    path = tmp_path / "g16.png"
    Image.fromarray(arr).save(path)
    img = load_image(path)
    assert img.data[0, 2, 0] == 1.0
    assert abs(img.data[0, 1, 0] - 32768 / 65535) < 1e-12


def test_pfm_round_trip_bit_exact(tmp_path):
    d = DepthMap(np.full((4, 4), 0.5))
    path = tmp_path / "d.pfm"
    save_depth(d, path)
    assert np.array_equal(load_depth(path).data, d.data)
    # random float32 payload survives exactly too
    rng = np.random.default_rng(1)
    d2 = DepthMap(rng.uniform(-2, 2, (6, 5)).astype(np.float32).astype(np.float64))
    save_depth(d2, path)
    assert np.array_equal(load_depth(path).data, d2.data)


def test_pfm_header_format(tmp_path):
    path = tmp_path / "h.pfm"
    save_depth(DepthMap(np.zeros((4, 4))), path)
    head = path.read_bytes()[:12]
    assert head == b"Pf\n4 4\n-1.0\n"
    assert load_depth(path).width == 4


def test_pfm_error_paths(tmp_path):
    bad = tmp_path / "bad.pfm"
    bad.write_bytes(b"PF\n2 2\n-1.0\n" + b"\x00" * 48)
    with pytest.raises(ValueError, match="magic"):
        load_depth(bad)
    nan = tmp_path / "nan.pfm"
    nan.write_bytes(b"Pf\n2 2\n-1.0\n" + np.array([1, np.nan, 0, 0], "<f4").tobytes())
    with pytest.raises(ValueError, match="non-finite"):
        load_depth(nan)
    short = tmp_path / "short.pfm"
    short.write_bytes(b"Pf\n2 2\n-1.0\n" + b"\x00" * 8)
    with pytest.raises(ValueError, match="truncated"):
        load_depth(short)


def test_mask_and_label_round_trips(tmp_path):
    rng = np.random.default_rng(2)
    mask = MaskImage(rng.uniform(size=(9, 7)) > 0.5)
    mpath = tmp_path / "m.png"
    save_mask(mask, mpath)
    assert np.array_equal(load_mask(mpath).data, mask.data)

    labels = LabelMap(rng.integers(0, 9, (9, 7)))
    lpath = tmp_path / "l.png"
    save_labels(labels, lpath)
    assert np.array_equal(load_labels(lpath).data, labels.data)


def test_label_value_validation():
    with pytest.raises(ValueError, match="LabelMap values"):
        LabelMap(np.full((2, 2), 12, dtype=np.uint8))


def test_container_validation():
    with pytest.raises(ValueError):
        RgbImage(np.full((2, 2, 3), 1.5))
    with pytest.raises(ValueError):
        RgbImage(np.full((2, 2, 3), np.nan))
    with pytest.raises(ValueError):
        DepthMap(np.full((2, 2), np.inf))
    img = RgbImage(np.zeros((2, 2, 3)))
    with pytest.raises(ValueError):
        img.data[0, 0, 0] = 1.0  # containers are read-only


def test_bilinear_integer_lattice():
    rng = np.random.default_rng(3)
    img = RgbImage(rng.uniform(0, 1, (5, 6, 3)))
    assert np.array_equal(bilinear_sample(img, 2.0, 3.0), img.data[3, 2])


def test_bilinear_midpoint_and_padding():
    g = GrayImage(np.array([[0.0, 1.0]]))
    assert bilinear_sample(g, 0.5, 0.0) == 0.5
    assert bilinear_sample(g, -5.0, 0.0) == 0.0
    assert bilinear_sample(g, 7.0, 3.0) == 1.0


def test_bilinear_continuity():
    rng = np.random.default_rng(4)
    img = GrayImage(rng.uniform(0, 1, (6, 6)))
    delta = 1e-7
    for x, y in rng.uniform(0, 5, (20, 2)):
        a = bilinear_sample(img, x, y)
        b = bilinear_sample(img, x + delta, y)
        assert abs(a - b) < 10 * delta


def test_to_gray_coefficients():
    white = RgbImage(np.ones((2, 2, 3)))
    assert np.allclose(to_gray(white).data, 1.0)
    green = RgbImage(np.tile(np.array([0.0, 1.0, 0.0]), (2, 2, 1)))
    assert np.allclose(to_gray(green).data, 0.587)
    black = RgbImage(np.zeros((2, 2, 3)))
    assert np.all(to_gray(black).data == 0.0)


def test_to_gray_range_and_affinity():
    rng = np.random.default_rng(5)
    a = RgbImage(rng.uniform(0, 1, (4, 4, 3)))
    g = to_gray(a)
    assert g.data.min() >= 0.0 and g.data.max() <= 1.0
    # affine in each channel: doubling a channel adds its coefficient's worth
    half = RgbImage(a.data * 0.5)
    assert np.allclose(to_gray(half).data, g.data * 0.5)
