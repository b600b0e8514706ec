"""Synthetic benchmark image, neighbor-hit metric and embedding recoloring."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .image import UNLABELED, HighDimImage, LabelRaster

__all__ = [
    "SyntheticSpec",
    "NeighborHitCurve",
    "DEFAULT_CORNERS",
    "generate_synthetic",
    "generate_spectral_standin",
    "neighbor_hit",
    "recolor",
    "write_ppm",
    "read_ppm",
    "write_png",
    "save_embedding_csv",
    "load_embedding_csv",
    "save_trace_csv",
    "save_curve_csv",
]

# homogeneous squares in ring order: top-left, top-right, bottom-right, bottom-left
DEFAULT_MEANS = ((0.2, 0.2), (0.8, 0.2), (0.8, 0.8), (0.2, 0.8))

# each frame quadrant mixes its own square's class with the next one clockwise,
# so every class shows up in two checkerboards and all pairs differ
DEFAULT_PAIRS = ((0, 1), (1, 2), (2, 3), (3, 0))

# blue, magenta, yellow, green at (0,0), (1,0), (0,1), (1,1)
DEFAULT_CORNERS = ((40, 70, 220), (220, 40, 160), (240, 220, 40), (40, 200, 90))


@dataclass(frozen=True)
class SyntheticSpec:
    """Layout and noise of the checkerboard test image.

    The central half of the image holds four homogeneous squares, one per
    class, in ring order TL, TR, BR, BL. The frame around them is split into
    four quadrants; quadrant ``q`` alternates ``block``-sized tiles of the two
    classes in ``pairs[q]``.
    """

    side: int = 32
    channels: int = 2
    class_means: tuple = DEFAULT_MEANS
    noise_sd: float = 0.05
    block: int = 2
    seed: int = 0
    pairs: tuple = DEFAULT_PAIRS

    def __post_init__(self):
        if self.side % (4 * self.block) != 0:
            raise ValueError("side must be divisible by 4 * block")
        if len(self.class_means) != 4 or len(self.pairs) != 4:
            raise ValueError("exactly four classes and four quadrant pairs")
        if any(len(m) != self.channels for m in self.class_means):
            raise ValueError("every class mean needs one value per channel")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")


def _synthetic_layout(spec: SyntheticSpec):
    s = spec.side
    half, q = s // 2, s // 4
    ys, xs = np.mgrid[0:s, 0:s]
    quad_of = np.array([[0, 1], [3, 2]])  # [bottom][right] -> ring index
    quad = quad_of[(ys >= half).astype(int), (xs >= half).astype(int)]
    inner = (xs >= q) & (xs < s - q) & (ys >= q) & (ys < s - q)
    tile = ((xs // spec.block) + (ys // spec.block)) % 2
    pairs = np.asarray(spec.pairs)
    attr_class = np.where(inner, quad, pairs[quad, tile])
    # labels 1..4 homogeneous squares, 5..8 checker quadrants
    label = np.where(inner, quad + 1, quad + 5)
    return attr_class, label


def generate_synthetic(spec: SyntheticSpec = SyntheticSpec()):
    """Return ``(image, labels)`` for the checkerboard benchmark."""
    attr_class, label = _synthetic_layout(spec)
    means = np.asarray(spec.class_means, dtype=np.float64)
    rng = np.random.default_rng(spec.seed)
    noise = rng.normal(0.0, spec.noise_sd, size=(spec.side, spec.side, spec.channels))
    pixels = means[attr_class] + noise
    image = HighDimImage.from_array(pixels)
    return image, LabelRaster(spec.side, spec.side, label)


def generate_spectral_standin(side: int = 24, channels: int = 200, seed: int = 0):
    """Small field-mosaic cube with smooth spectra, standing in for a hyperspectral crop.

    Rectangular fields carry one of five material spectra, some with a row
    texture (crop rows); a one-pixel unlabeled track separates the fields.
    """
    rng = np.random.default_rng(seed)
    wl = np.linspace(0.0, 1.0, channels)
    n_mat = 5
    centers = rng.uniform(0.1, 0.9, size=(n_mat, 3))
    widths = rng.uniform(0.05, 0.25, size=(n_mat, 3))
    heights = rng.uniform(0.2, 1.0, size=(n_mat, 3))
    spectra = np.stack([
        0.3 + sum(heights[m, t] * np.exp(-((wl - centers[m, t]) ** 2) / (2 * widths[m, t] ** 2))
                  for t in range(3))
        for m in range(n_mat)
    ])
    bg = 0.3 + 0.2 * wl

    cut = [0, side // 3, 2 * side // 3, side]
    material = np.zeros((side, side), dtype=int)
    label = np.zeros((side, side), dtype=int)
    cells = [(r, c) for r in range(3) for c in range(3)]
    for f, (r, c) in enumerate(cells):
        material[cut[r]:cut[r + 1], cut[c]:cut[c + 1]] = f % n_mat
        label[cut[r]:cut[r + 1], cut[c]:cut[c + 1]] = f + 1
    pixels = spectra[material].copy()
    # crop rows in every other field: darken alternating pixel rows
    ys = np.arange(side)[:, None] * np.ones((1, side), dtype=int)
    rowed = (label % 2 == 0) & (ys % 2 == 0)
    pixels[rowed] *= 0.8
    # unlabeled access tracks between fields
    for t in cut[1:-1]:
        pixels[t, :, :] = bg
        pixels[:, t, :] = bg
        label[t, :] = UNLABELED
        label[:, t] = UNLABELED
    pixels += rng.normal(0.0, 0.03, size=pixels.shape)
    return HighDimImage.from_array(pixels), LabelRaster(side, side, label)


# ---------------------------------------------------------------------------
# neighbor hit


@dataclass(frozen=True, eq=False)
class NeighborHitCurve:
    hits: np.ndarray  # hits[k - 1] for k = 1..k_max

    @property
    def k_max(self) -> int:
        return self.hits.size

    def at(self, k: int) -> float:
        return float(self.hits[k - 1])


def neighbor_hit(coords, labels, k_max: int, block: int = 512) -> NeighborHitCurve:
    """Average same-label fraction among each point's k nearest embedding neighbors.

    The probe itself is excluded and ties go to the smaller index. Unlabeled
    points are never probes but can be neighbors, where they count as misses.
    """
    y = np.asarray(coords, dtype=np.float64)
    lab = labels.labels if isinstance(labels, LabelRaster) else np.asarray(labels)
    n = y.shape[0]
    if lab.shape[0] != n:
        raise ValueError(f"{n} embedding points but {lab.shape[0]} labels")
    if not 1 <= k_max < n:
        raise ValueError(f"k_max must satisfy 1 <= k_max < n = {n}")
    probes = np.flatnonzero(lab != UNLABELED)
    if probes.size == 0:
        raise ValueError("no labeled points to probe")
    total = np.zeros(k_max)
    ks = np.arange(1, k_max + 1)
    for start in range(0, probes.size, block):
        ids = probes[start:start + block]
        diff = y[ids, None, :] - y[None, :, :]
        d = (diff * diff).sum(-1)
        d[np.arange(ids.size), ids] = np.inf
        order = np.argsort(d, axis=1, kind="stable")[:, :k_max]
        same = (lab[order] == lab[ids, None]) & (lab[ids, None] != UNLABELED)
        total += (np.cumsum(same, axis=1) / ks).sum(axis=0)
    return NeighborHitCurve(total / probes.size)


# ---------------------------------------------------------------------------
# recoloring


def _unit_axes(coords: np.ndarray) -> np.ndarray:
    lo, hi = coords.min(axis=0), coords.max(axis=0)
    span = hi - lo
    return np.where(span > 0, (coords - lo) / np.where(span > 0, span, 1.0), 0.5)


def recolor(coords, width: int, height: int, corners=DEFAULT_CORNERS) -> np.ndarray:
    """Map embedding coordinates through a bilinear 4-corner colormap.

    ``corners`` are RGB triples at normalized positions (0,0), (1,0), (0,1),
    (1,1). Returns a ``(height, width, 3)`` uint8 image in pixel order.
    """
    y = np.asarray(coords, dtype=np.float64)
    if y.shape != (width * height, 2):
        raise ValueError(f"expected {width * height} 2D points, got {y.shape}")
    c = np.asarray(corners, dtype=np.float64)
    if c.shape != (4, 3):
        raise ValueError("need four RGB corner colors")
    uv = _unit_axes(y)
    u, v = uv[:, :1], uv[:, 1:]
    rgb = (1 - u) * (1 - v) * c[0] + u * (1 - v) * c[1] + (1 - u) * v * c[2] + u * v * c[3]
    out = np.clip(np.floor(rgb + 0.5), 0, 255).astype(np.uint8)
    return out.reshape(height, width, 3)


def write_ppm(rgb: np.ndarray, path) -> None:
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(rgb, dtype=np.uint8).tobytes())


def read_ppm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(maxsplit=4)
    if parts[0] != b"P6" or int(parts[3]) != 255:
        raise ValueError(f"{path} is not an 8-bit P6 file")
    w, h = int(parts[1]), int(parts[2])
    data = parts[4]
    return np.frombuffer(data[: w * h * 3], dtype=np.uint8).reshape(h, w, 3)


def write_png(rgb: np.ndarray, path) -> None:
    from PIL import Image

    Image.fromarray(np.ascontiguousarray(rgb, dtype=np.uint8), mode="RGB").save(path)


# ---------------------------------------------------------------------------
# CSV exports


def save_embedding_csv(coords, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,y\n")
        for x, y in np.asarray(coords):
            fh.write(f"{float(x)!r},{float(y)!r}\n")


def load_embedding_csv(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.float64, ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns")
    return data


def save_trace_csv(trace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iter,kl\n")
        for it, kl in trace:
            fh.write(f"{int(it)},{float(kl)!r}\n")


def save_curve_csv(curve: NeighborHitCurve, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("k,hit\n")
        for k, h in enumerate(curve.hits, start=1):
            fh.write(f"{k},{float(h)!r}\n")
