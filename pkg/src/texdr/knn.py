"""Exact k-nearest-neighbor graphs over image pixels under any distance kind."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .distances import DistanceKind, FeatureCache, build_cache, distance_matrix, distance_rows
from .image import HighDimImage

__all__ = ["KnnGraph", "build_knn", "exact_knn", "knn_from_matrix", "save_knn_csv"]

# above this many points the full distance matrix is not materialized
FULL_MATRIX_LIMIT = 6000


@dataclass(frozen=True, eq=False)
class KnnGraph:
    indices: np.ndarray  # (n, k) int64
    distances: np.ndarray  # (n, k) float64, ascending per row

    @property
    def n(self) -> int:
        return self.indices.shape[0]

    @property
    def k(self) -> int:
        return self.indices.shape[1]

    def __eq__(self, other):
        if not isinstance(other, KnnGraph):
            return NotImplemented
        return np.array_equal(self.indices, other.indices) and np.array_equal(
            self.distances, other.distances
        )

    __hash__ = None


def _select(row: np.ndarray, i: int, k: int):
    row = row.copy()
    row[i] = np.inf
    # stable sort: equal distances keep ascending pixel-id order
    order = np.argsort(row, kind="stable")[:k]
    return order, row[order]


def knn_from_matrix(dist: np.ndarray, k: int) -> KnnGraph:
    n = dist.shape[0]
    _check_k(n, k)
    idx = np.empty((n, k), dtype=np.int64)
    dst = np.empty((n, k))
    for i in range(n):
        idx[i], dst[i] = _select(dist[i], i, k)
    return KnnGraph(idx, dst)


def exact_knn(n: int, rows_fn: Callable[[np.ndarray], np.ndarray], k: int,
              block: int = 256) -> KnnGraph:
    """Exact knn from an opaque ``rows_fn(ids) -> (len(ids), n)`` distance callable.

    This is the seam where an approximate backend would plug in.
    """
    _check_k(n, k)
    idx = np.empty((n, k), dtype=np.int64)
    dst = np.empty((n, k))
    for start in range(0, n, block):
        ids = np.arange(start, min(start + block, n))
        rows = rows_fn(ids)
        for r, i in enumerate(ids):
            idx[i], dst[i] = _select(rows[r], i, k)
    return KnnGraph(idx, dst)


def build_knn(image: HighDimImage, kind: DistanceKind, k: int,
              cache: FeatureCache | None = None) -> KnnGraph:
    """The ``k`` nearest pixels of every pixel; ties go to the smaller pixel id."""
    _check_k(image.n, k)
    if cache is None:
        cache = build_cache(image, kind)
    if image.n <= FULL_MATRIX_LIMIT:
        return knn_from_matrix(distance_matrix(cache), k)
    return exact_knn(image.n, lambda ids: distance_rows(cache, ids), k)


def _check_k(n: int, k: int) -> None:
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n = {n}, got {k}")


def save_knn_csv(graph: KnnGraph, path) -> None:
    """Rows ``i, j_1..j_k, d_1..d_k``."""
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(graph.n):
            fields = [str(i)]
            fields += [str(int(j)) for j in graph.indices[i]]
            fields += [repr(float(d)) for d in graph.distances[i]]
            fh.write(",".join(fields) + "\n")
