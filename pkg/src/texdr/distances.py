"""Pixel distances: the attribute baseline and the texture-aware family.

Every kernel here is written so that ``d(a, b)`` and ``d(b, a)`` are bitwise
identical; the knn builder relies on this to fill only one triangle of the
distance matrix.

Point-cloud weights are given per point and sum to one. Weighted variants are
scaled so that uniform weights reproduce the unweighted kernels: a point's
relative weight is ``M * w``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .features import (
    CovarianceFeature,
    HistogramStack,
    channel_bin_edges,
    covariance_feature,
    covariance_features,
    histogram_feature,
    histogram_features,
    rice_bins,
)
from .image import HighDimImage, NeighborhoodSpec, PixelIndex, extract_patch, extract_patches

__all__ = [
    "KINDS",
    "DistanceKind",
    "QfBinSimilarity",
    "FeatureCache",
    "NumericalSingularityError",
    "euclidean_sq",
    "qf_bin_similarity",
    "qf_distance",
    "bhattacharyya_distance",
    "chamfer_distance",
    "hausdorff_distance",
    "hausdorff_median_distance",
    "ssd_distance",
    "build_cache",
    "pairwise_distance",
    "distance_matrix",
    "distance_rows",
    "distance_pairs",
]

POINT_CLOUD_KINDS = ("chamfer", "hausdorff", "hausdorff-median", "ssd")
KINDS = ("euclidean-sq", "qf-histogram", "bhattacharyya") + POINT_CLOUD_KINDS
_PC_CODE = {name: i for i, name in enumerate(POINT_CLOUD_KINDS)}

DEFAULT_RIDGE = 1e-6


class NumericalSingularityError(ArithmeticError):
    """A covariance stayed singular after regularization."""


@dataclass(frozen=True)
class DistanceKind:
    """A distance tag plus the parameters that kind needs.

    ``bins=None`` for ``qf-histogram`` means the Rice rule on the window
    size. ``ridge`` is relative: the added diagonal is
    ``ridge * trace(pooled) / C``.
    """

    tag: str
    neighborhood: NeighborhoodSpec | None = None
    bins: int | None = None
    ridge: float | None = None

    def __post_init__(self):
        if self.tag not in KINDS:
            raise ValueError(f"unknown distance kind {self.tag!r}; choose from {KINDS}")
        texture = self.tag != "euclidean-sq"
        if texture and self.neighborhood is None:
            object.__setattr__(self, "neighborhood", NeighborhoodSpec())
        if not texture and self.neighborhood is not None:
            raise ValueError("euclidean-sq takes no neighborhood")
        if self.bins is not None and self.tag != "qf-histogram":
            raise ValueError("bins only apply to qf-histogram")
        if self.ridge is not None and self.tag != "bhattacharyya":
            raise ValueError("ridge only applies to bhattacharyya")
        if self.tag == "bhattacharyya" and self.ridge is None:
            object.__setattr__(self, "ridge", DEFAULT_RIDGE)
        if self.ridge is not None and self.ridge < 0:
            raise ValueError("ridge must be non-negative")
        if self.bins is not None and self.bins < 1:
            raise ValueError("bins must be positive")

    @property
    def resolved_bins(self) -> int | None:
        if self.tag != "qf-histogram":
            return None
        return self.bins if self.bins is not None else rice_bins(self.neighborhood.size)


@dataclass(frozen=True, eq=False)
class QfBinSimilarity:
    matrix: np.ndarray

    @property
    def bins(self) -> int:
        return self.matrix.shape[0]


def qf_bin_similarity(bins: int) -> QfBinSimilarity:
    """Bin similarity ``a_bk = 1 - |b - k| / B``; rejects a non-PSD result."""
    if bins < 1:
        raise ValueError("bins must be positive")
    idx = np.arange(bins)
    a = 1.0 - np.abs(idx[:, None] - idx[None, :]) / bins
    if np.linalg.eigvalsh(a).min() < -1e-10:
        raise ValueError(f"bin similarity for B={bins} is not positive semi-definite")
    a.setflags(write=False)
    return QfBinSimilarity(a)


# ---------------------------------------------------------------------------
# numba kernels


@njit(cache=True, inline="always", error_model="numpy")
def _euclid(a, b):
    s = 0.0
    for c in range(a.shape[0]):
        d = a[c] - b[c]
        s += d * d
    return s


@njit(cache=True, inline="always", error_model="numpy")
def _qf(hi, hj, amat):
    """Dense quadratic form summed over channels; every bin pair is visited."""
    nc, nb = hi.shape
    total = 0.0
    for c in range(nc):
        for b in range(nb):
            db = hi[c, b] - hj[c, b]
            for k in range(nb):
                total += db * amat[b, k] * (hi[c, k] - hj[c, k])
    return total


@njit(cache=True, inline="always", error_model="numpy")
def _lu_logdet(w, piv):
    """In-place LU with partial pivoting of ``w``; returns ``(log|det|, sign)``.

    ``sign`` is 0 when a zero pivot is met.
    """
    n = w.shape[0]
    logdet = 0.0
    prod = 1.0
    sign = 1.0
    for k in range(n):
        p = k
        big = abs(w[k, k])
        for i in range(k + 1, n):
            v = abs(w[i, k])
            if v > big:
                big = v
                p = i
        piv[k] = p
        if big == 0.0:
            return 0.0, 0.0
        if p != k:
            for j in range(n):
                t = w[k, j]
                w[k, j] = w[p, j]
                w[p, j] = t
            sign = -sign
        d = w[k, k]
        if d < 0.0:
            sign = -sign
        # one log per matrix unless the running product nears over/underflow
        prod *= abs(d)
        if prod > 1e150 or prod < 1e-150:
            logdet += np.log(prod)
            prod = 1.0
        for i in range(k + 1, n):
            f = w[i, k] / d
            w[i, k] = f
            for j in range(k + 1, n):
                w[i, j] -= f * w[k, j]
    return logdet + np.log(prod), sign


@njit(cache=True, inline="always", error_model="numpy")
def _lu_solve(w, piv, x):
    """Solve ``A y = x`` in place given the LU of ``A`` stored in ``w``."""
    n = w.shape[0]
    for k in range(n):
        p = piv[k]
        if p != k:
            t = x[k]
            x[k] = x[p]
            x[p] = t
    for i in range(n):
        s = x[i]
        for j in range(i):
            s -= w[i, j] * x[j]
        x[i] = s
    for i in range(n - 1, -1, -1):
        s = x[i]
        for j in range(i + 1, n):
            s -= w[i, j] * x[j]
        x[i] = s / w[i, i]


@njit(cache=True, inline="always", error_model="numpy")
def _bhat(means, covs, i, j, ridge, w_i, w_j, w_p, piv, x):
    """Bhattacharyya distance of features ``i`` and ``j``; NaN if not PD after the ridge.

    ``w_i``, ``w_j``, ``w_p`` are ``(C, C)`` scratch, ``piv`` ``(C,)`` ints and
    ``x`` ``(C,)``. Callers slice these once, outside their pair loops.
    """
    n = means.shape[1]
    tr = 0.0
    for a in range(n):
        for b in range(n):
            w_i[a, b] = covs[i, a, b]
            w_j[a, b] = covs[j, a, b]
            w_p[a, b] = 0.5 * (covs[i, a, b] + covs[j, a, b])
        tr += w_p[a, a]
    eps = ridge * tr / n if tr > 0.0 else ridge
    for a in range(n):
        w_i[a, a] += eps
        w_j[a, a] += eps
        w_p[a, a] += eps
    ld_i, s_i = _lu_logdet(w_i, piv)
    ld_j, s_j = _lu_logdet(w_j, piv)
    ld_p, s_p = _lu_logdet(w_p, piv)
    if s_i <= 0.0 or s_j <= 0.0 or s_p <= 0.0:
        # not positive definite; piv may be incomplete, so no solve
        return np.nan
    for a in range(n):
        x[a] = means[i, a] - means[j, a]
    _lu_solve(w_p, piv, x)
    # x now holds pooled^-1 delta
    mterm = 0.0
    for a in range(n):
        mterm += (means[i, a] - means[j, a]) * x[a]
    return 0.125 * mterm + 0.5 * (ld_p - 0.5 * (ld_i + ld_j))


@njit(cache=True, error_model="numpy")
def _bhat_scratch(c):
    w = np.empty((3, c, c))
    return w[0], w[1], w[2], np.empty(c, dtype=np.int64), np.empty(c)


@njit(cache=True, error_model="numpy")
def _pc(a, b, wa, wb, weighted, code, dmat, rmin, cmin):
    """Point-cloud distance ``code``: 0 chamfer, 1 hausdorff, 2 median, 3 ssd."""
    ma = a.shape[0]
    mb = b.shape[0]
    nc = a.shape[1]
    for q in range(ma):
        for p in range(mb):
            s = 0.0
            for c in range(nc):
                d = a[q, c] - b[p, c]
                s += d * d
            dmat[q, p] = s
    if code == 3:
        t1 = 0.0
        t2 = 0.0
        if weighted:
            for q in range(ma):
                for p in range(mb):
                    t1 += (wa[q] / mb + wb[p] / ma) * dmat[q, p]
            for p in range(mb):
                for q in range(ma):
                    t2 += (wa[q] / mb + wb[p] / ma) * dmat[q, p]
            return 0.5 * (t1 + t2)
        for q in range(ma):
            for p in range(mb):
                t1 += dmat[q, p]
        for p in range(mb):
            for q in range(ma):
                t2 += dmat[q, p]
        return (t1 + t2) / (ma * mb)
    for q in range(ma):
        m = np.inf
        for p in range(mb):
            if dmat[q, p] < m:
                m = dmat[q, p]
        rmin[q] = m
    for p in range(mb):
        m = np.inf
        for q in range(ma):
            if dmat[q, p] < m:
                m = dmat[q, p]
        cmin[p] = m
    if code == 0:
        t1 = 0.0
        t2 = 0.0
        if weighted:
            for q in range(ma):
                t1 += wa[q] * rmin[q]
            for p in range(mb):
                t2 += wb[p] * cmin[p]
            return t1 + t2
        for q in range(ma):
            t1 += rmin[q]
        for p in range(mb):
            t2 += cmin[p]
        return t1 / ma + t2 / mb
    if weighted:
        for q in range(ma):
            rmin[q] *= ma * wa[q]
        for p in range(mb):
            cmin[p] *= mb * wb[p]
    if code == 1:
        return max(rmin[:ma].max(), cmin[:mb].max())
    return 0.5 * (np.median(rmin[:ma]) + np.median(cmin[:mb]))


@njit(cache=True, error_model="numpy")
def _euclid_matrix(points, out):
    n = points.shape[0]
    for i in range(n):
        out[i, i] = 0.0
        for j in range(i + 1, n):
            d = _euclid(points[i], points[j])
            out[i, j] = d
            out[j, i] = d


@njit(cache=True, error_model="numpy")
def _qf_matrix(hists, amat, out):
    n = hists.shape[0]
    for i in range(n):
        out[i, i] = 0.0
        for j in range(i + 1, n):
            d = _qf(hists[i], hists[j], amat)
            out[i, j] = d
            out[j, i] = d


@njit(cache=True, error_model="numpy")
def _bhat_matrix(means, covs, ridge, out):
    n, c = means.shape
    w_i, w_j, w_p, piv, x = _bhat_scratch(c)
    for i in range(n):
        out[i, i] = 0.0
        for j in range(i + 1, n):
            d = _bhat(means, covs, i, j, ridge, w_i, w_j, w_p, piv, x)
            out[i, j] = d
            out[j, i] = d


@njit(cache=True, error_model="numpy")
def _pc_matrix(patches, w, weighted, code, out):
    n, m, _ = patches.shape
    dmat = np.empty((m, m))
    rmin = np.empty(m)
    cmin = np.empty(m)
    for i in range(n):
        # ssd compares all cross pairs, so a non-constant window is not at zero from itself
        out[i, i] = _pc(patches[i], patches[i], w, w, weighted, code, dmat, rmin, cmin) if code == 3 else 0.0
        for j in range(i + 1, n):
            d = _pc(patches[i], patches[j], w, w, weighted, code, dmat, rmin, cmin)
            out[i, j] = d
            out[j, i] = d


@njit(cache=True, error_model="numpy")
def _pc_rows(patches, w, weighted, code, rows, out):
    n, m, _ = patches.shape
    dmat = np.empty((m, m))
    rmin = np.empty(m)
    cmin = np.empty(m)
    for r in range(rows.shape[0]):
        i = rows[r]
        for j in range(n):
            out[r, j] = _pc(patches[i], patches[j], w, w, weighted, code, dmat, rmin, cmin)


@njit(cache=True, error_model="numpy")
def _qf_rows(hists, amat, rows, out):
    n = hists.shape[0]
    for r in range(rows.shape[0]):
        for j in range(n):
            out[r, j] = _qf(hists[rows[r]], hists[j], amat)


@njit(cache=True, error_model="numpy")
def _bhat_rows(means, covs, ridge, rows, out):
    n, c = means.shape
    w_i, w_j, w_p, piv, x = _bhat_scratch(c)
    for r in range(rows.shape[0]):
        for j in range(n):
            out[r, j] = _bhat(means, covs, rows[r], j, ridge, w_i, w_j, w_p, piv, x)


@njit(cache=True, error_model="numpy")
def _euclid_rows(points, rows, out):
    n = points.shape[0]
    for r in range(rows.shape[0]):
        for j in range(n):
            out[r, j] = _euclid(points[rows[r]], points[j])


@njit(cache=True, error_model="numpy")
def _euclid_pairs(points, pi, pj, out):
    for e in range(pi.shape[0]):
        out[e] = _euclid(points[pi[e]], points[pj[e]])


@njit(cache=True, error_model="numpy")
def _qf_pairs(hists, amat, pi, pj, out):
    for e in range(pi.shape[0]):
        out[e] = _qf(hists[pi[e]], hists[pj[e]], amat)


@njit(cache=True, error_model="numpy")
def _bhat_pairs(means, covs, ridge, pi, pj, out):
    w_i, w_j, w_p, piv, x = _bhat_scratch(means.shape[1])
    for e in range(pi.shape[0]):
        out[e] = _bhat(means, covs, pi[e], pj[e], ridge, w_i, w_j, w_p, piv, x)


@njit(cache=True, error_model="numpy")
def _pc_pairs(patches, w, weighted, code, pi, pj, out):
    m = patches.shape[1]
    dmat = np.empty((m, m))
    rmin = np.empty(m)
    cmin = np.empty(m)
    for e in range(pi.shape[0]):
        out[e] = _pc(patches[pi[e]], patches[pj[e]], w, w, weighted, code, dmat, rmin, cmin)


# ---------------------------------------------------------------------------
# single-pair API


def euclidean_sq(g_i, g_j) -> float:
    """Squared Euclidean distance between two attribute vectors."""
    a = np.ascontiguousarray(g_i, dtype=np.float64)
    b = np.ascontiguousarray(g_j, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"attribute vectors differ in shape: {a.shape} vs {b.shape}")
    return float(_euclid(a, b))


def qf_distance(feat_i: HistogramStack, feat_j: HistogramStack, amat: QfBinSimilarity) -> float:
    """Quadratic-form distance summed over channels."""
    hi, hj = feat_i.values, feat_j.values
    if hi.shape != hj.shape:
        raise ValueError(f"histogram stacks differ in shape: {hi.shape} vs {hj.shape}")
    if hi.shape[1] != amat.bins:
        raise ValueError(f"{hi.shape[1]} bins against a {amat.bins}-bin similarity")
    if not np.array_equal(feat_i.bin_edges, feat_j.bin_edges):
        raise ValueError("histogram stacks use different bin edges")
    return float(
        _qf(
            np.ascontiguousarray(hi, dtype=np.float64),
            np.ascontiguousarray(hj, dtype=np.float64),
            np.ascontiguousarray(amat.matrix),
        )
    )


def bhattacharyya_distance(
    feat_i: CovarianceFeature, feat_j: CovarianceFeature, ridge: float = DEFAULT_RIDGE,
    pair=None,
) -> float:
    """Bhattacharyya distance between two (mean, covariance) features."""
    c = feat_i.channels
    if feat_j.channels != c:
        raise ValueError(f"features have {c} and {feat_j.channels} channels")
    means = np.ascontiguousarray(np.stack([feat_i.mean, feat_j.mean]), dtype=np.float64)
    covs = np.ascontiguousarray(
        np.stack([feat_i.covariance, feat_j.covariance]), dtype=np.float64
    )
    val = _bhat(means, covs, 0, 1, float(ridge), *_bhat_scratch(c))
    if np.isnan(val):
        where = f" for pixel pair {pair}" if pair is not None else ""
        raise NumericalSingularityError(
            f"covariance singular after ridge {ridge:g}{where}"
        )
    return float(val)


def _pc_call(code, t_i, t_j, weights_i, weights_j) -> float:
    a = np.ascontiguousarray(t_i, dtype=np.float64)
    b = np.ascontiguousarray(t_j, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape != b.shape:
        raise ValueError(f"point clouds differ in shape: {a.shape} vs {b.shape}")
    m = a.shape[0]
    wa = np.full(m, 1.0 / m) if weights_i is None else np.ascontiguousarray(weights_i, dtype=np.float64)
    wb = np.full(m, 1.0 / m) if weights_j is None else np.ascontiguousarray(weights_j, dtype=np.float64)
    if wa.shape != (m,) or wb.shape != (m,):
        raise ValueError("one weight per point required")
    weighted = not (_is_uniform(wa) and _is_uniform(wb))
    return float(
        _pc(a, b, wa, wb, weighted, code, np.empty((m, m)), np.empty(m), np.empty(m))
    )


def _is_uniform(w: np.ndarray) -> bool:
    return bool(np.all(w == w[0]))


def chamfer_distance(t_i, t_j, weights_i=None, weights_j=None) -> float:
    """Sum of the two directional averages of nearest-point squared distances."""
    return _pc_call(0, t_i, t_j, weights_i, weights_j)


def hausdorff_distance(t_i, t_j, weights_i=None, weights_j=None) -> float:
    return _pc_call(1, t_i, t_j, weights_i, weights_j)


def hausdorff_median_distance(t_i, t_j, weights_i=None, weights_j=None) -> float:
    """Mean of the two directional medians of nearest-point squared distances.

    An even count takes the mean of the central pair.
    """
    return _pc_call(2, t_i, t_j, weights_i, weights_j)


def ssd_distance(t_i, t_j, weights_i=None, weights_j=None) -> float:
    """Twice the mean squared distance over all cross pairs of points."""
    return _pc_call(3, t_i, t_j, weights_i, weights_j)


# ---------------------------------------------------------------------------
# feature caches and whole-image evaluation


@dataclass(frozen=True, eq=False)
class FeatureCache:
    """Precomputed per-pixel inputs for one distance kind on one image."""

    kind: DistanceKind
    width: int
    height: int
    arrays: dict = field(repr=False)

    @property
    def n(self) -> int:
        return self.width * self.height


def build_cache(image: HighDimImage, kind: DistanceKind) -> FeatureCache:
    """Extract every pixel's feature (or raw patch) once."""
    arrays = {}
    if kind.tag == "euclidean-sq":
        arrays["points"] = np.ascontiguousarray(image.points)
    else:
        spec = kind.neighborhood
        patches = extract_patches(image, spec)
        w = np.ascontiguousarray(spec.weights())
        if kind.tag == "qf-histogram":
            b = kind.resolved_bins
            edges = channel_bin_edges(image, b)
            arrays["hist"] = np.ascontiguousarray(histogram_features(patches, w, edges))
            arrays["edges"] = edges
            arrays["A"] = np.ascontiguousarray(qf_bin_similarity(b).matrix)
        elif kind.tag == "bhattacharyya":
            mu, cov = covariance_features(patches, w)
            arrays["means"] = np.ascontiguousarray(mu)
            arrays["covs"] = np.ascontiguousarray(cov)
        else:
            arrays["patches"] = patches
            arrays["weights"] = w
    for a in arrays.values():
        a.setflags(write=False)
    return FeatureCache(kind, image.width, image.height, arrays)


def pairwise_distance(
    image: HighDimImage, p_i: PixelIndex, p_j: PixelIndex, kind: DistanceKind,
    cache: FeatureCache | None = None,
) -> float:
    """Distance between two pixels under ``kind``.

    With a cache the precomputed features are used; without one the two
    pixels' features are extracted on demand.
    """
    i, j = image.pixel_id(p_i), image.pixel_id(p_j)
    if cache is not None:
        if cache.kind != kind or cache.n != image.n:
            raise ValueError(
                f"cache built for {cache.kind.tag} on {cache.n} pixels, "
                f"asked for {kind.tag} on {image.n}"
            )
        return _cache_pair(cache, i, j)
    if kind.tag == "euclidean-sq":
        return euclidean_sq(image.attributes(p_i), image.attributes(p_j))
    spec = kind.neighborhood
    t_i, w = extract_patch(image, p_i, spec)
    t_j, _ = extract_patch(image, p_j, spec)
    if kind.tag == "qf-histogram":
        edges = channel_bin_edges(image, kind.resolved_bins)
        return qf_distance(
            histogram_feature(t_i, w, edges), histogram_feature(t_j, w, edges),
            qf_bin_similarity(kind.resolved_bins),
        )
    if kind.tag == "bhattacharyya":
        return bhattacharyya_distance(
            covariance_feature(t_i, w), covariance_feature(t_j, w), kind.ridge, pair=(i, j)
        )
    fn = {
        "chamfer": chamfer_distance,
        "hausdorff": hausdorff_distance,
        "hausdorff-median": hausdorff_median_distance,
        "ssd": ssd_distance,
    }[kind.tag]
    return fn(t_i, t_j, w, w)


def _cache_pair(cache: FeatureCache, i: int, j: int) -> float:
    val = float(distance_pairs(cache, np.array([i]), np.array([j]))[0])
    if np.isnan(val):
        raise NumericalSingularityError(
            f"covariance singular after regularization for pixel pair ({i}, {j})"
        )
    return val


def distance_matrix(cache: FeatureCache) -> np.ndarray:
    """Full symmetric ``(n, n)`` distance matrix.

    The diagonal holds ``d(i, i)``, which is zero for every kind except ssd.
    """
    n = cache.n
    out = np.empty((n, n))
    a = cache.arrays
    tag = cache.kind.tag
    if tag == "euclidean-sq":
        _euclid_matrix(a["points"], out)
    elif tag == "qf-histogram":
        _qf_matrix(a["hist"], a["A"], out)
    elif tag == "bhattacharyya":
        _bhat_matrix(a["means"], a["covs"], float(cache.kind.ridge), out)
        _raise_on_nan(out)
    else:
        weighted = not cache.kind.neighborhood.is_uniform
        _pc_matrix(a["patches"], a["weights"], weighted, _PC_CODE[tag], out)
    return out


def distance_rows(cache: FeatureCache, rows) -> np.ndarray:
    """Distances from pixels ``rows`` to every pixel, ``(len(rows), n)``."""
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    out = np.empty((rows.size, cache.n))
    _dispatch_rows(cache.kind, cache.arrays, rows, out)
    if cache.kind.tag == "bhattacharyya" and np.isnan(out).any():
        r, j = np.argwhere(np.isnan(out))[0]
        raise NumericalSingularityError(
            f"covariance singular after regularization for pixel pair ({rows[r]}, {j})"
        )
    return out


def distance_pairs(cache: FeatureCache, pi, pj) -> np.ndarray:
    """Distances for the pixel-id pairs ``(pi[e], pj[e])``."""
    pi = np.ascontiguousarray(pi, dtype=np.int64)
    pj = np.ascontiguousarray(pj, dtype=np.int64)
    if pi.shape != pj.shape:
        raise ValueError("pair index arrays differ in length")
    out = np.empty(pi.size)
    a = cache.arrays
    kind = cache.kind
    if kind.tag == "euclidean-sq":
        _euclid_pairs(a["points"], pi, pj, out)
    elif kind.tag == "qf-histogram":
        _qf_pairs(a["hist"], a["A"], pi, pj, out)
    elif kind.tag == "bhattacharyya":
        _bhat_pairs(a["means"], a["covs"], float(kind.ridge), pi, pj, out)
    else:
        weighted = not kind.neighborhood.is_uniform
        _pc_pairs(a["patches"], a["weights"], weighted, _PC_CODE[kind.tag], pi, pj, out)
    return out


def _dispatch_rows(kind, a, rows, out):
    tag = kind.tag
    if tag == "euclidean-sq":
        _euclid_rows(a["points"], rows, out)
    elif tag == "qf-histogram":
        _qf_rows(a["hist"], a["A"], rows, out)
    elif tag == "bhattacharyya":
        _bhat_rows(a["means"], a["covs"], float(kind.ridge), rows, out)
    else:
        weighted = not kind.neighborhood.is_uniform
        _pc_rows(a["patches"], a["weights"], weighted,
                 _PC_CODE[tag], rows, out)


def _raise_on_nan(out: np.ndarray) -> None:
    bad = np.argwhere(np.isnan(out))
    if bad.size:
        i, j = bad[0]
        raise NumericalSingularityError(
            f"covariance singular after regularization for pixel pair ({i}, {j})"
        )
