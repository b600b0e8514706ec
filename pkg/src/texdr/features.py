"""Per-pixel texture features: local histograms and covariance/mean pairs."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .image import HighDimImage, NeighborhoodSpec, extract_patches

__all__ = [
    "HistogramStack",
    "CovarianceFeature",
    "rice_bins",
    "channel_bin_edges",
    "histogram_feature",
    "histogram_features",
    "covariance_feature",
    "covariance_features",
    "save_feature_dump",
]


@dataclass(frozen=True, eq=False)
class HistogramStack:
    """Normalized local histograms, one row of ``bins`` per channel."""

    values: np.ndarray  # (C, B)
    bin_edges: np.ndarray  # (C, B + 1)

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def bins(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class CovarianceFeature:
    mean: np.ndarray  # (C,)
    covariance: np.ndarray  # (C, C)

    @property
    def channels(self) -> int:
        return self.mean.shape[0]


def rice_bins(m: int) -> int:
    """Bin count from the Rice rule, ``ceil(2 * m ** (1/3))``."""
    if m < 1:
        raise ValueError("neighborhood size must be at least 1")
    # smallest integer b with b**3 >= 8m, exact in integers
    b = math.ceil(2.0 * m ** (1.0 / 3.0))
    while (b - 1) ** 3 >= 8 * m:
        b -= 1
    while b ** 3 < 8 * m:
        b += 1
    return b


def channel_bin_edges(image: HighDimImage, bins: int) -> np.ndarray:
    """Uniform-width edges spanning each channel's global range, ``(C, bins + 1)``.

    A constant channel gets the unit interval around its value so edges stay
    strictly increasing.
    """
    if bins < 1:
        raise ValueError("need at least one bin")
    pts = image.points
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    flat = hi <= lo
    lo = np.where(flat, lo - 0.5, lo)
    hi = np.where(flat, hi + 0.5, hi)
    t = np.linspace(0.0, 1.0, bins + 1)
    return lo[:, None] + (hi - lo)[:, None] * t[None, :]


def _check_edges(edges: np.ndarray) -> None:
    if edges.ndim != 2 or edges.shape[1] < 2:
        raise ValueError("bin edges must have shape (C, B + 1) with B >= 1")
    if np.any(np.diff(edges, axis=1) <= 0):
        raise ValueError("bin edges must be strictly increasing")


def _bin_index(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    # edges[b] <= v < edges[b+1]; anything outside is clamped to the end bins
    b = np.searchsorted(edges, values, side="right") - 1
    return np.clip(b, 0, edges.size - 2)


def histogram_feature(patch, weights, bin_edges) -> HistogramStack:
    """Weighted local histogram per channel of one ``(M, C)`` patch.

    Each patch row contributes its weight to the bin its value falls in;
    rows are normalized by the total weight.
    """
    patch = np.asarray(patch, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    edges = np.atleast_2d(np.asarray(bin_edges, dtype=np.float64))
    _check_edges(edges)
    m, c = patch.shape
    if edges.shape[0] != c:
        raise ValueError(f"{edges.shape[0]} edge rows for {c} channels")
    nb = edges.shape[1] - 1
    out = np.zeros((c, nb))
    for ch in range(c):
        idx = _bin_index(patch[:, ch], edges[ch])
        np.add.at(out[ch], idx, w)
    out /= w.sum()
    return HistogramStack(out, edges)


def histogram_features(patches: np.ndarray, weights, bin_edges) -> np.ndarray:
    """Vectorized :func:`histogram_feature` over ``(n, M, C)`` patches -> ``(n, C, B)``."""
    edges = np.atleast_2d(np.asarray(bin_edges, dtype=np.float64))
    _check_edges(edges)
    n, m, c = patches.shape
    nb = edges.shape[1] - 1
    w = np.asarray(weights, dtype=np.float64)
    out = np.zeros((n, c, nb))
    rows = np.repeat(np.arange(n), m)
    wt = np.tile(w, n)
    for ch in range(c):
        idx = _bin_index(patches[:, :, ch].ravel(), edges[ch])
        np.add.at(out[:, ch, :], (rows, idx), wt)
    out /= w.sum()
    return out


def covariance_feature(patch, weights) -> CovarianceFeature:
    """Weighted mean and population covariance of the patch rows."""
    patch = np.asarray(patch, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    mu = w @ patch
    centered = patch - mu
    cov = (centered * w[:, None]).T @ centered
    cov = 0.5 * (cov + cov.T)
    return CovarianceFeature(mu, cov)


def covariance_features(patches: np.ndarray, weights):
    """Vectorized :func:`covariance_feature`; returns ``(means, covs)``."""
    w = np.asarray(weights, dtype=np.float64)
    mu = np.einsum("m,nmc->nc", w, patches)
    centered = patches - mu[:, None, :]
    cov = np.einsum("m,nma,nmb->nab", w, centered, centered)
    cov = 0.5 * (cov + np.swapaxes(cov, 1, 2))
    return mu, cov


def image_features(image: HighDimImage, spec: NeighborhoodSpec, kind: str, bins=None):
    """Precompute features for every pixel (``"histogram"`` or ``"covariance"``)."""
    patches = extract_patches(image, spec)
    w = spec.weights()
    if kind == "histogram":
        b = bins or rice_bins(spec.size)
        edges = channel_bin_edges(image, b)
        return histogram_features(patches, w, edges), edges
    if kind == "covariance":
        return covariance_features(patches, w)
    raise ValueError(f"unknown feature kind {kind!r}")


def save_feature_dump(path, kind: str, spec: NeighborhoodSpec, *arrays) -> None:
    """Write per-pixel features as raw f64le with a JSON header (debug aid only).

    The payload is the concatenation of ``arrays`` in order; the header lists
    each array's shape.
    """
    path = Path(path)
    header = {
        "kind": kind,
        "radius": spec.radius,
        "weighting": spec.weighting,
        "shapes": [list(a.shape) for a in arrays],
        "dtype": "f64le",
    }
    with open(path, "wb") as fh:
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
    path.with_name(path.name + ".json").write_text(json.dumps(header), encoding="utf-8")
