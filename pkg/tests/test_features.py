import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from oracles import histogram, population_cov
from texdr.features import (
    channel_bin_edges,
    covariance_feature,
    covariance_features,
    histogram_feature,
    histogram_features,
    image_features,
    rice_bins,
    save_feature_dump,
)
from texdr.image import HighDimImage, NeighborhoodSpec, extract_patches


def test_rice_table():
    assert [rice_bins(m) for m in (9, 25, 49, 81)] == [5, 6, 8, 9]


@given(st.integers(1, 10**6))
def test_rice_is_smallest_integer_at_least_twice_cube_root(m):
    b = rice_bins(m)
    assert b ** 3 >= 8 * m > (b - 1) ** 3


def test_bin_edges_use_global_channel_range():
    arr = np.stack([np.linspace(0, 1, 16).reshape(4, 4), np.full((4, 4), 3.0)], -1)
    edges = channel_bin_edges(HighDimImage.from_array(arr), 4)
    np.testing.assert_allclose(edges[0], [0, 0.25, 0.5, 0.75, 1.0])
    np.testing.assert_allclose(edges[1], [2.5, 2.75, 3.0, 3.25, 3.5])


finite = st.floats(-5, 5, allow_nan=False)


@given(hnp.arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 3)), elements=finite),
       st.integers(1, 7))
def test_histogram_matches_loop_oracle(patch, nb):
    lo, hi = patch.min(0) - 0.1, patch.max(0) + 0.1
    edges = lo[:, None] + (hi - lo)[:, None] * np.linspace(0, 1, nb + 1)[None, :]
    w = np.random.default_rng(0).random(patch.shape[0]) + 0.1
    h = histogram_feature(patch, w, edges)
    np.testing.assert_allclose(h.values, histogram(patch, w, edges), atol=1e-14)
    np.testing.assert_allclose(h.values.sum(1), 1.0, atol=1e-14)


def test_values_on_edges_and_outside_are_clamped():
    edges = np.array([[0.0, 1.0, 2.0]])
    h = histogram_feature(np.array([[-1.0], [1.0], [2.0], [5.0]]), np.full(4, 0.25), edges)
    # -1 -> first bin, 1.0 -> second (left-closed), 2.0 and 5 -> last
    np.testing.assert_allclose(h.values, [[0.25, 0.75]])


def test_gaussian_weighted_histogram_puts_center_mass():
    spec = NeighborhoodSpec(radius=1, weighting="gaussian")
    w = spec.weights()
    patch = np.zeros((9, 1))
    patch[4, 0] = 1.0  # only the center lands in the upper bin
    h = histogram_feature(patch, w, np.array([[-0.5, 0.5, 1.5]]))
    assert h.values[0, 1] == pytest.approx(w[4])
    assert h.values[0, 1] > 1 / 9


def test_vectorized_features_match_single_pixel_versions():
    rng = np.random.default_rng(2)
    img = HighDimImage.from_array(rng.random((5, 6, 3)))
    spec = NeighborhoodSpec(radius=1, weighting="gaussian")
    patches = extract_patches(img, spec)
    w = spec.weights()
    edges = channel_bin_edges(img, 5)
    hist = histogram_features(patches, w, edges)
    mu, cov = covariance_features(patches, w)
    for pid in range(img.n):
        np.testing.assert_allclose(hist[pid], histogram_feature(patches[pid], w, edges).values,
                                   atol=1e-15)
        f = covariance_feature(patches[pid], w)
        np.testing.assert_allclose(mu[pid], f.mean, atol=1e-15)
        np.testing.assert_allclose(cov[pid], f.covariance, atol=1e-15)


@given(hnp.arrays(np.float64, st.tuples(st.integers(1, 10), st.integers(1, 4)), elements=finite))
def test_uniform_covariance_matches_population_oracle(patch):
    m = patch.shape[0]
    f = covariance_feature(patch, np.full(m, 1.0 / m))
    mu, cov = population_cov(patch)
    np.testing.assert_allclose(f.mean, mu, atol=1e-12)
    np.testing.assert_allclose(f.covariance, cov, atol=1e-12)
    np.testing.assert_array_equal(f.covariance, f.covariance.T)


def test_weighted_covariance_matches_repeated_points():
    # integer weights are the same as repeating points
    patch = np.array([[0.0, 1.0], [2.0, -1.0], [1.0, 4.0]])
    counts = np.array([1, 3, 2])
    f = covariance_feature(patch, counts / counts.sum())
    mu, cov = population_cov(np.repeat(patch, counts, axis=0))
    np.testing.assert_allclose(f.mean, mu, atol=1e-14)
    np.testing.assert_allclose(f.covariance, cov, atol=1e-14)


def test_image_features_default_bins_and_dump(tmp_path):
    img = HighDimImage.from_array(np.random.default_rng(0).random((4, 4, 2)))
    hist, edges = image_features(img, NeighborhoodSpec(1), "histogram")
    assert hist.shape == (16, 2, 5) and edges.shape == (2, 6)
    mu, cov = image_features(img, NeighborhoodSpec(1), "covariance")
    save_feature_dump(tmp_path / "f.bin", "covariance", NeighborhoodSpec(1), mu, cov)
    raw = np.fromfile(tmp_path / "f.bin", dtype="<f8")
    np.testing.assert_array_equal(raw, np.concatenate([mu.ravel(), cov.ravel()]))
    with pytest.raises(ValueError):
        image_features(img, NeighborhoodSpec(1), "moments")
