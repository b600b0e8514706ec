import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import gaussian_weights, window_ids
from texdr.image import (
    HighDimImage,
    ImageFormatError,
    LabelRaster,
    NeighborhoodSpec,
    PixelIndex,
    extract_patch,
    extract_patches,
    gaussian_filter,
    gaussian_kernel,
    load_image,
    load_labels,
    neighborhood_indices,
    neighborhood_members,
    normalize_channels,
    save_image,
    save_labels,
)


def rand_image(h, w, c, seed=0):
    return HighDimImage.from_array(np.random.default_rng(seed).random((h, w, c)))


def test_layout_is_row_major_with_contiguous_channels():
    arr = np.arange(2 * 3 * 4, dtype=float).reshape(2, 3, 4)
    img = HighDimImage.from_array(arr)
    assert (img.width, img.height, img.channels, img.n) == (3, 2, 4, 6)
    assert img.pixel_id(PixelIndex(2, 1)) == 5
    assert img.pixel_at(5) == PixelIndex(2, 1)
    np.testing.assert_array_equal(img.attributes(PixelIndex(1, 0)), arr[0, 1])
    np.testing.assert_array_equal(img.data[4:8], arr[0, 1])


def test_image_is_immutable_and_validated():
    img = rand_image(3, 3, 2)
    with pytest.raises(ValueError):
        img.pixels[0, 0, 0] = 1.0
    with pytest.raises(ValueError):
        HighDimImage(2, 2, 1, np.zeros(5))
    with pytest.raises(ValueError):
        HighDimImage.from_array(np.array([[np.nan]]))
    with pytest.raises(IndexError):
        img.attributes(PixelIndex(3, 0))


def test_flat_binary_round_trip_large(tmp_path):
    img = rand_image(145, 145, 200, seed=3)
    path = tmp_path / "cube.bin"
    save_image(img, path)
    hdr = json.loads((tmp_path / "cube.bin.json").read_text())
    assert hdr == {"width": 145, "height": 145, "channels": 200, "dtype": "f64le"}
    assert path.stat().st_size == 145 * 145 * 200 * 8
    back = load_image(path)
    assert back == img


def test_csv_round_trip_is_exact(tmp_path):
    img = rand_image(4, 5, 3, seed=1)
    path = tmp_path / "img.csv"
    save_image(img, path)
    assert load_image(path) == img


def test_size_mismatch_is_a_format_error(tmp_path):
    path = tmp_path / "bad.bin"
    save_image(rand_image(3, 3, 2), path)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ImageFormatError, match="payload"):
        load_image(path)
    with pytest.raises(FileNotFoundError):
        load_image(tmp_path / "missing.bin")


def test_labels_round_trip(tmp_path):
    lab = LabelRaster(3, 2, [0, 1, 2, 3, 4, 0])
    save_labels(lab, tmp_path / "gt.csv")
    assert load_labels(tmp_path / "gt.csv") == lab
    (tmp_path / "bad.csv").write_text("1,2\n3\n")
    with pytest.raises(ImageFormatError):
        load_labels(tmp_path / "bad.csv")


def test_window_size_and_offsets():
    spec = NeighborhoodSpec(radius=2)
    assert spec.size == 25
    off = spec.offsets()
    assert tuple(off[0]) == (-2, -2) and tuple(off[12]) == (0, 0) and tuple(off[-1]) == (2, 2)
    assert NeighborhoodSpec(radius=0).size == 1


@given(
    w=st.integers(1, 7), h=st.integers(1, 7), r=st.integers(0, 3),
    border=st.sampled_from(["clamp", "mirror"]),
)
def test_neighborhood_indices_match_oracle(w, h, r, border):
    spec = NeighborhoodSpec(radius=r, border=border)
    idx = neighborhood_indices(w, h, spec)
    for pid in range(w * h):
        assert list(idx[pid]) == window_ids(w, h, pid % w, pid // w, r, border)


def test_clamp_repeats_edge_and_mirror_reflects_without_repeat():
    img = HighDimImage.from_array(np.arange(5.0)[None, :])
    pts, _ = extract_patch(img, PixelIndex(0, 0), NeighborhoodSpec(2, border="clamp"))
    assert list(pts[10:15, 0]) == [0, 0, 0, 1, 2]
    pts, _ = extract_patch(img, PixelIndex(0, 0), NeighborhoodSpec(2, border="mirror"))
    assert list(pts[10:15, 0]) == [2, 1, 0, 1, 2]


def test_members_and_patches_agree():
    img = rand_image(5, 6, 3)
    spec = NeighborhoodSpec(radius=1, weighting="gaussian")
    patches = extract_patches(img, spec)
    for pid in (0, 7, 29):
        p = img.pixel_at(pid)
        pts, w = extract_patch(img, p, spec)
        np.testing.assert_array_equal(pts, patches[pid])
        members = neighborhood_members(img, p, spec)
        assert len(members) == 9
        np.testing.assert_allclose([wt for _, wt in members], w)


@pytest.mark.parametrize("r", [1, 2, 3])
def test_gaussian_weights_default_sigma_is_half_radius(r):
    w = NeighborhoodSpec(radius=r, weighting="gaussian").weights()
    np.testing.assert_allclose(w, gaussian_weights(r), rtol=1e-14)
    assert w.sum() == pytest.approx(1.0, abs=1e-15)
    assert w.argmax() == w.size // 2
    np.testing.assert_allclose(w, w[::-1])


def test_uniform_and_radius_zero_weights():
    np.testing.assert_array_equal(NeighborhoodSpec(1).weights(), np.full(9, 1 / 9))
    assert NeighborhoodSpec(0, weighting="gaussian").weights().tolist() == [1.0]


def test_bad_specs_rejected():
    for kw in ({"radius": -1}, {"weighting": "box"}, {"border": "wrap"}, {"sigma": 0.0}):
        with pytest.raises(ValueError):
            NeighborhoodSpec(**kw)


def test_gaussian_filter_impulse_footprint():
    arr = np.zeros((9, 9, 1))
    arr[4, 4, 0] = 1.0
    out = gaussian_filter(HighDimImage.from_array(arr), sigma=5.0, ksize=3).pixels[:, :, 0]
    g = gaussian_kernel(5.0, 3)
    expected = np.zeros((9, 9))
    expected[3:6, 3:6] = np.outer(g, g)
    np.testing.assert_allclose(out, expected, atol=1e-15)
    assert out.sum() == pytest.approx(1.0)


def test_gaussian_filter_keeps_constants_and_border():
    img = HighDimImage.from_array(np.full((4, 3, 2), 0.7))
    np.testing.assert_allclose(gaussian_filter(img).pixels, 0.7, rtol=1e-15)


def test_normalize_modes():
    img = HighDimImage.from_array(np.stack([np.arange(6.0).reshape(2, 3), np.ones((2, 3))], -1))
    mm = normalize_channels(img, "min-max").points
    np.testing.assert_allclose(mm[:, 0], np.arange(6) / 5)
    np.testing.assert_array_equal(mm[:, 1], 0.0)
    z = normalize_channels(img, "z-score").points
    assert abs(z[:, 0].mean()) < 1e-15 and z[:, 0].std() == pytest.approx(1.0)
    assert normalize_channels(img, "none") is img
    with pytest.raises(ValueError):
        normalize_channels(img, "rank")
