"""Slow, obviously-correct reference implementations used as test oracles.

Nothing here imports the package's numba kernels; every function is written
from the definitions with plain loops or dense numpy.
"""

from __future__ import annotations

import math

import numpy as np


def window_ids(width, height, x, y, radius, border="clamp"):
    """Row-major window pixel ids, resolved one coordinate at a time."""

    def res(c, size):
        if border == "clamp" or size == 1:
            return min(max(c, 0), size - 1)
        period = 2 * (size - 1)
        c = c % period
        return c if c < size else period - c

    out = []
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            out.append(res(y + dy, height) * width + res(x + dx, width))
    return out


def gaussian_weights(radius, sigma=None):
    if radius == 0:
        return np.ones(1)
    s = radius / 2.0 if sigma is None else sigma
    w = []
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            w.append(math.exp(-(dx * dx + dy * dy) / (2 * s * s)))
    w = np.array(w)
    return w / w.sum()


def histogram(patch, weights, edges):
    """Loop histogram: each point adds its weight to the bin holding it."""
    m, c = patch.shape
    nb = edges.shape[1] - 1
    out = np.zeros((c, nb))
    for ch in range(c):
        for q in range(m):
            v = patch[q, ch]
            b = 0
            while b < nb - 1 and v >= edges[ch, b + 1]:
                b += 1
            out[ch, b] += weights[q]
    return out / weights.sum()


def qf_double_sum(hi, hj, amat):
    """Sum over channels of sum_b sum_k (hi-hj)_b a_bk (hi-hj)_k."""
    total = 0.0
    c, nb = hi.shape
    for ch in range(c):
        for b in range(nb):
            for k in range(nb):
                total += (hi[ch, b] - hj[ch, b]) * amat[b, k] * (hi[ch, k] - hj[ch, k])
    return total


def population_cov(patch):
    """Unweighted population covariance and mean, by explicit loops."""
    m, c = patch.shape
    mu = [sum(patch[q, a] for q in range(m)) / m for a in range(c)]
    cov = np.zeros((c, c))
    for a in range(c):
        for b in range(c):
            cov[a, b] = sum((patch[q, a] - mu[a]) * (patch[q, b] - mu[b]) for q in range(m)) / m
    return np.array(mu), cov


def bhattacharyya_dense(mu1, s1, mu2, s2):
    """Closed form via numpy.linalg, no regularization."""
    s = 0.5 * (s1 + s2)
    d = mu1 - mu2
    _, ld = np.linalg.slogdet(s)
    _, l1 = np.linalg.slogdet(s1)
    _, l2 = np.linalg.slogdet(s2)
    return 0.125 * d @ np.linalg.solve(s, d) + 0.5 * (ld - 0.5 * (l1 + l2))


def bhattacharyya_scalar(m1, v1, m2, v2):
    """One-channel specialization."""
    v = 0.5 * (v1 + v2)
    return (m1 - m2) ** 2 / (8.0 * v) + 0.5 * math.log(v / math.sqrt(v1 * v2))


def sq_dists(a, b):
    return ((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)


def chamfer(a, b):
    d = sq_dists(a, b)
    return d.min(axis=1).mean() + d.min(axis=0).mean()


def chamfer_weighted(a, b, wa, wb):
    d = sq_dists(a, b)
    return float(wa @ d.min(axis=1) + wb @ d.min(axis=0))


def hausdorff(a, b):
    d = sq_dists(a, b)
    return max(d.min(axis=1).max(), d.min(axis=0).max())


def hausdorff_median(a, b):
    d = sq_dists(a, b)
    return 0.5 * (np.median(d.min(axis=1)) + np.median(d.min(axis=0)))


def ssd(a, b):
    return 2.0 * sq_dists(a, b).mean()


def brute_knn(dist, k):
    """Sort each row by (distance, id) with Python's sort, self excluded."""
    n = dist.shape[0]
    idx = np.empty((n, k), dtype=np.int64)
    dst = np.empty((n, k))
    for i in range(n):
        cand = sorted((float(dist[i, j]), j) for j in range(n) if j != i)[:k]
        idx[i] = [j for _, j in cand]
        dst[i] = [d for d, _ in cand]
    return idx, dst


def perplexity_of(p):
    p = p[p > 0]
    return math.exp(-float(np.sum(p * np.log(p))))


def neighbor_hit_loop(coords, labels, k):
    """Per-probe loop with a (distance, id) sort."""
    n = coords.shape[0]
    total, probes = 0.0, 0
    for i in range(n):
        if labels[i] == 0:
            continue
        d = sorted((float(((coords[i] - coords[j]) ** 2).sum()), j) for j in range(n) if j != i)
        nn = [j for _, j in d[:k]]
        total += sum(labels[j] == labels[i] for j in nn) / k
        probes += 1
    return total / probes


def finite_difference_grad(f, y, h=1e-5):
    g = np.zeros_like(y)
    for idx in np.ndindex(*y.shape):
        yp = y.copy()
        ym = y.copy()
        yp[idx] += h
        ym[idx] -= h
        g[idx] = (f(yp) - f(ym)) / (2 * h)
    return g
