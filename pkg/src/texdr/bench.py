"""Timing harness for the distance kernels.

Feature extraction and distance evaluation are timed separately. Only the
scaling of the distance phase with B, M or C is meant to be compared across
machines; absolute numbers are not.
"""

from __future__ import annotations

import csv
import os
import platform
import time
from dataclasses import dataclass, field

import numba
import numpy as np

from .distances import DistanceKind, build_cache, distance_pairs
from .image import HighDimImage, NeighborhoodSpec

__all__ = ["BenchRow", "BenchReport", "bench_kernel", "bench_sweep", "fit_exponent", "random_image"]

@dataclass(frozen=True)
class BenchRow:
    kind: str
    eta: int
    channels: int
    bins: int
    n_pairs: int
    feature_ns_per_pixel: float
    mean_ns_per_pair: float
    sd_ns: float


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            self.write(fh)

    def write(self, fh) -> None:
        for k, v in self.metadata.items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "eta", "C", "B", "n_pairs", "feature_ns_per_pixel",
                    "mean_ns_per_pair", "sd_ns"])
        for r in self.rows:
            w.writerow([r.kind, r.eta, r.channels, r.bins, r.n_pairs,
                        f"{r.feature_ns_per_pixel:.3f}", f"{r.mean_ns_per_pair:.3f}",
                        f"{r.sd_ns:.3f}"])


def _metadata() -> dict:
    return {
        "threads": numba.get_num_threads(),
        "numba": numba.__version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "machine": platform.machine(),
        "cpus": os.cpu_count(),
    }


def random_image(side: int, channels: int, seed: int = 0) -> HighDimImage:
    rng = np.random.default_rng(seed)
    return HighDimImage.from_array(rng.random((side, side, channels)))


def _pairs(n: int, n_pairs: int, seed: int):
    if n_pairs < 1:
        raise ValueError("n_pairs must be positive")
    rng = np.random.default_rng(seed)
    return rng.integers(0, n, size=n_pairs), rng.integers(0, n, size=n_pairs)


def _timed_cache(image: HighDimImage, kind: DistanceKind):
    t0 = time.perf_counter_ns()
    cache = build_cache(image, kind)
    return cache, (time.perf_counter_ns() - t0) / image.n


def _time_pairs(cache, pi, pj) -> float:
    t0 = time.perf_counter_ns()
    distance_pairs(cache, pi, pj)
    return (time.perf_counter_ns() - t0) / pi.size


def _row(kind: DistanceKind, image: HighDimImage, n_pairs: int, feat_ns: float, per_pair) -> BenchRow:
    per_pair = np.asarray(per_pair)
    eta = kind.neighborhood.radius if kind.neighborhood is not None else 0
    return BenchRow(kind.tag, eta, image.channels, kind.resolved_bins or 0, n_pairs,
                    feat_ns, float(per_pair.mean()), float(per_pair.std()))


def bench_kernel(kind: DistanceKind, image: HighDimImage, n_pairs: int = 2000,
                 repetitions: int = 5, warmup: int = 1, seed: int = 0) -> BenchRow:
    """Time one kernel configuration on seeded random pixel pairs."""
    pi, pj = _pairs(image.n, n_pairs, seed)
    cache, feat_ns = _timed_cache(image, kind)
    for _ in range(warmup):
        distance_pairs(cache, pi, pj)
    per_pair = [_time_pairs(cache, pi, pj) for _ in range(repetitions)]
    return _row(kind, image, n_pairs, feat_ns, per_pair)


def bench_sweep(tag: str, etas=(1,), channels=(2,), bins=(None,), side: int = 48,
                n_pairs: int = 2000, repetitions: int = 5, seed: int = 0) -> BenchReport:
    """Cartesian sweep over radius, channel count and bin count.

    Channel subsets are drawn once from a seeded permutation of the widest
    image, so a run with fewer channels uses a prefix of the same subset.
    Repetitions cycle through all configurations in turn, so slow drift in
    machine speed spreads evenly instead of biasing whichever ran first.
    """
    report = BenchReport(metadata=_metadata())
    base = random_image(side, max(channels), seed)
    perm = np.random.default_rng(seed + 1).permutation(max(channels))
    pi, pj = _pairs(base.n, n_pairs, seed)
    configs = []
    for c in channels:
        img = base.select_channels(perm[:c]) if c < base.channels else base
        for eta in etas:
            for b in bins:
                nb = NeighborhoodSpec(eta) if tag != "euclidean-sq" else None
                kw = {"bins": b} if tag == "qf-histogram" else {}
                kind = DistanceKind(tag, nb, **kw)
                cache, feat_ns = _timed_cache(img, kind)
                distance_pairs(cache, pi, pj)  # warmup, compiles on first use
                configs.append((kind, img, cache, feat_ns, []))
    for _ in range(repetitions):
        for _, _, cache, _, times in configs:
            times.append(_time_pairs(cache, pi, pj))
    for kind, img, _, feat_ns, times in configs:
        report.rows.append(_row(kind, img, n_pairs, feat_ns, times))
    return report


def fit_exponent(sizes, times) -> float:
    """Slope of the least-squares line through ``(log size, log time)``."""
    x = np.log(np.asarray(sizes, dtype=np.float64))
    y = np.log(np.asarray(times, dtype=np.float64))
    return float(np.polyfit(x, y, 1)[0])
