"""High-dimensional image model, file I/O, spatial neighborhoods and filters.

Images are stored as ``(height, width, channels)`` float64 arrays; the flat
``data`` view is row-major by pixel with channels contiguous per pixel. Pixel
ids are ``y * width + x`` and all coordinates are 0-based.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

__all__ = [
    "HighDimImage",
    "PixelIndex",
    "NeighborhoodSpec",
    "LabelRaster",
    "ImageFormatError",
    "load_image",
    "save_image",
    "load_labels",
    "save_labels",
    "neighborhood_members",
    "neighborhood_indices",
    "extract_patch",
    "extract_patches",
    "gaussian_kernel",
    "gaussian_filter",
    "normalize_channels",
]

UNLABELED = 0


class ImageFormatError(ValueError):
    """Raised for malformed image or label files."""


@dataclass(frozen=True, eq=False)
class HighDimImage:
    """A raster whose pixels carry ``channels`` real attributes."""

    width: int
    height: int
    channels: int
    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.width < 1 or self.height < 1 or self.channels < 1:
            raise ValueError(
                f"image dimensions must be positive, got "
                f"{self.width}x{self.height}x{self.channels}"
            )
        arr = np.array(self.pixels, dtype=np.float64, order="C", copy=True)
        expected = self.width * self.height * self.channels
        if arr.size != expected:
            raise ValueError(
                f"data has {arr.size} values, expected {expected} "
                f"({self.width}x{self.height}x{self.channels})"
            )
        arr = arr.reshape(self.height, self.width, self.channels)
        if not np.all(np.isfinite(arr)):
            raise ValueError("image contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def from_array(cls, arr) -> "HighDimImage":
        """Build from an ``(height, width)`` or ``(height, width, channels)`` array."""
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError(f"expected a 2D or 3D array, got shape {arr.shape}")
        h, w, c = arr.shape
        return cls(width=w, height=h, channels=c, pixels=arr)

    @property
    def n(self) -> int:
        return self.width * self.height

    @property
    def data(self) -> np.ndarray:
        """Flat attribute array of length ``width * height * channels``."""
        return self.pixels.reshape(-1)

    @property
    def points(self) -> np.ndarray:
        """Attribute vectors as an ``(n, channels)`` matrix in pixel-id order."""
        return self.pixels.reshape(self.n, self.channels)

    def pixel_id(self, p: "PixelIndex") -> int:
        self._check(p)
        return p.y * self.width + p.x

    def pixel_at(self, pixel_id: int) -> "PixelIndex":
        if not 0 <= pixel_id < self.n:
            raise IndexError(f"pixel id {pixel_id} outside [0, {self.n})")
        return PixelIndex(pixel_id % self.width, pixel_id // self.width)

    def attributes(self, p: "PixelIndex") -> np.ndarray:
        self._check(p)
        return self.pixels[p.y, p.x]

    def select_channels(self, channels) -> "HighDimImage":
        return HighDimImage.from_array(self.pixels[:, :, list(channels)])

    def crop(self, x0: int, y0: int, width: int, height: int) -> "HighDimImage":
        if x0 < 0 or y0 < 0 or x0 + width > self.width or y0 + height > self.height:
            raise ValueError("crop window exceeds image bounds")
        return HighDimImage.from_array(self.pixels[y0:y0 + height, x0:x0 + width])

    def _check(self, p: "PixelIndex") -> None:
        if not (0 <= p.x < self.width and 0 <= p.y < self.height):
            raise IndexError(f"pixel {tuple(p)} outside {self.width}x{self.height} image")

    def __eq__(self, other):
        if not isinstance(other, HighDimImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and np.array_equal(
            self.pixels, other.pixels
        )

    __hash__ = None


class PixelIndex(NamedTuple):
    x: int
    y: int


@dataclass(frozen=True)
class NeighborhoodSpec:
    """Square window of radius ``radius`` with a weighting and border rule.

    ``sigma`` is only used for gaussian weighting; ``None`` means
    ``radius / 2``.
    """

    radius: int = 1
    weighting: str = "uniform"
    sigma: float | None = None
    border: str = "clamp"

    def __post_init__(self):
        if int(self.radius) != self.radius or self.radius < 0:
            raise ValueError(f"radius must be a non-negative integer, got {self.radius}")
        if self.weighting not in ("uniform", "gaussian"):
            raise ValueError(f"unknown weighting {self.weighting!r}")
        if self.border not in ("clamp", "mirror"):
            raise ValueError(f"unknown border policy {self.border!r}")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError("gaussian sigma must be positive")

    @property
    def size(self) -> int:
        """Neighborhood pixel count M."""
        return (2 * self.radius + 1) ** 2

    @property
    def is_uniform(self) -> bool:
        return self.weighting == "uniform" or self.radius == 0

    def offsets(self) -> np.ndarray:
        """``(M, 2)`` array of ``(dx, dy)`` in row-major offset order."""
        r = np.arange(-self.radius, self.radius + 1)
        dy, dx = np.meshgrid(r, r, indexing="ij")
        return np.stack([dx.ravel(), dy.ravel()], axis=1)

    def weights(self) -> np.ndarray:
        """Weights per offset, summing to one."""
        m = self.size
        if self.is_uniform:
            return np.full(m, 1.0 / m)
        sigma = self.sigma if self.sigma is not None else self.radius / 2.0
        off = self.offsets().astype(np.float64)
        w = np.exp(-(off ** 2).sum(axis=1) / (2.0 * sigma * sigma))
        return w / w.sum()


@dataclass(frozen=True, eq=False)
class LabelRaster:
    width: int
    height: int
    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.labels, dtype=np.int64).reshape(-1)
        if arr.size != self.width * self.height:
            raise ValueError(
                f"label count {arr.size} does not match {self.width}x{self.height}"
            )
        if np.any(arr < 0):
            raise ValueError("class ids must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "labels", arr)

    @property
    def grid(self) -> np.ndarray:
        return self.labels.reshape(self.height, self.width)

    def __eq__(self, other):
        if not isinstance(other, LabelRaster):
            return NotImplemented
        return (self.width, self.height) == (other.width, other.height) and np.array_equal(
            self.labels, other.labels
        )

    __hash__ = None


# ---------------------------------------------------------------------------
# file formats


def _header_path(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def load_image(path, format: str | None = None) -> HighDimImage:
    """Read an image in ``flat-binary`` or ``csv`` format.

    The format is inferred from the suffix when not given (``.csv`` is CSV,
    anything else flat-binary with a ``<path>.json`` header).
    """
    path = Path(path)
    fmt = format or _infer_format(path)
    if not path.exists():
        raise FileNotFoundError(f"image file not found: {path}")
    if fmt == "flat-binary":
        hdr_path = _header_path(path)
        if not hdr_path.exists():
            raise FileNotFoundError(f"missing header {hdr_path}")
        try:
            hdr = json.loads(hdr_path.read_text(encoding="utf-8"))
            w, h, c = int(hdr["width"]), int(hdr["height"]), int(hdr["channels"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ImageFormatError(f"bad header {hdr_path}: {exc}") from exc
        if hdr.get("dtype", "f64le") != "f64le":
            raise ImageFormatError(f"unsupported dtype {hdr.get('dtype')!r}")
        raw = path.read_bytes()
        if len(raw) != w * h * c * 8:
            raise ImageFormatError(
                f"header declares {w}x{h}x{c} = {w * h * c} values, "
                f"payload holds {len(raw) / 8:g}"
            )
        data = np.frombuffer(raw, dtype="<f8")
    elif fmt == "csv":
        w, h, c, data = _read_csv(path)
    else:
        raise ValueError(f"unknown image format {fmt!r}")
    if not np.all(np.isfinite(data)):
        raise ImageFormatError(f"{path} contains non-finite values")
    return HighDimImage(w, h, c, data)


def _read_csv(path: Path):
    dims = None
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].replace(" ", "").split(",")
                if dims is None and len(parts) == 3 and all(p.isdigit() for p in parts):
                    dims = tuple(int(p) for p in parts)
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError as exc:
                raise ImageFormatError(f"{path}: unparsable row {line!r}") from exc
    if dims is None:
        raise ImageFormatError(f"{path}: missing '# width,height,channels' line")
    w, h, c = dims
    if len(rows) != w * h or any(len(r) != c for r in rows):
        raise ImageFormatError(
            f"{path}: header declares {w * h} pixels x {c} channels, "
            f"found {len(rows)} rows"
        )
    return w, h, c, np.asarray(rows, dtype=np.float64).reshape(-1)


def _infer_format(path: Path) -> str:
    return "csv" if path.suffix.lower() == ".csv" else "flat-binary"


def save_image(image: HighDimImage, path, format: str | None = None) -> None:
    path = Path(path)
    fmt = format or _infer_format(path)
    if fmt == "flat-binary":
        header = {
            "width": image.width,
            "height": image.height,
            "channels": image.channels,
            "dtype": "f64le",
        }
        path.write_bytes(image.data.astype("<f8").tobytes())
        _header_path(path).write_text(json.dumps(header), encoding="utf-8")
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# {image.width},{image.height},{image.channels}\n")
            for row in image.points:
                fh.write(",".join(repr(float(v)) for v in row))
                fh.write("\n")
    else:
        raise ValueError(f"unknown image format {format!r}")


def load_labels(path) -> LabelRaster:
    """Read a label CSV (one line per image row, 0 = unlabeled)."""
    path = Path(path)
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rows.append([int(v) for v in line.split(",")])
            except ValueError as exc:
                raise ImageFormatError(f"{path}: non-integer label in {line!r}") from exc
    if not rows or len({len(r) for r in rows}) != 1:
        raise ImageFormatError(f"{path}: ragged or empty label raster")
    return LabelRaster(len(rows[0]), len(rows), np.asarray(rows))


def save_labels(labels: LabelRaster, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in labels.grid:
            fh.write(",".join(str(int(v)) for v in row))
            fh.write("\n")


# ---------------------------------------------------------------------------
# neighborhoods


def _resolve(coord: np.ndarray, size: int, border: str) -> np.ndarray:
    if border == "clamp" or size == 1:
        return np.clip(coord, 0, size - 1)
    # mirror without repeating the edge pixel (…2 1 | 0 1 2 … n-1 | n-2 …)
    period = 2 * (size - 1)
    c = np.mod(coord, period)
    return np.where(c < size, c, period - c)


def neighborhood_indices(width: int, height: int, spec: NeighborhoodSpec) -> np.ndarray:
    """``(n, M)`` pixel ids of every pixel's window, border policy applied."""
    off = spec.offsets()
    ys, xs = np.divmod(np.arange(width * height), width)
    nx = _resolve(xs[:, None] + off[None, :, 0], width, spec.border)
    ny = _resolve(ys[:, None] + off[None, :, 1], height, spec.border)
    return ny * width + nx


def neighborhood_members(image: HighDimImage, center: PixelIndex, spec: NeighborhoodSpec):
    """List of ``(PixelIndex, weight)`` covering the window around ``center``."""
    image._check(center)
    off = spec.offsets()
    xs = _resolve(center.x + off[:, 0], image.width, spec.border)
    ys = _resolve(center.y + off[:, 1], image.height, spec.border)
    w = spec.weights()
    return [
        (PixelIndex(int(x), int(y)), float(wt)) for x, y, wt in zip(xs, ys, w)
    ]


def extract_patch(image: HighDimImage, center: PixelIndex, spec: NeighborhoodSpec):
    """Point cloud of the window around ``center``.

    Returns ``(points, weights)`` with ``points`` of shape ``(M, C)`` in
    row-major offset order.
    """
    members = neighborhood_members(image, center, spec)
    pts = np.array([image.pixels[p.y, p.x] for p, _ in members])
    return pts, np.array([w for _, w in members])


def extract_patches(image: HighDimImage, spec: NeighborhoodSpec) -> np.ndarray:
    """Point clouds of all pixels as an ``(n, M, C)`` array."""
    idx = neighborhood_indices(image.width, image.height, spec)
    return np.ascontiguousarray(image.points[idx])


# ---------------------------------------------------------------------------
# filters


def gaussian_kernel(sigma: float, ksize: int) -> np.ndarray:
    """Normalized 1D Gaussian taps of odd length ``ksize``."""
    if ksize < 1 or ksize % 2 == 0:
        raise ValueError(f"ksize must be odd and positive, got {ksize}")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    half = ksize // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def gaussian_filter(image: HighDimImage, sigma: float = 5.0, ksize: int = 3) -> HighDimImage:
    """Separable per-channel Gaussian blur with clamp-to-edge borders."""
    g = gaussian_kernel(sigma, ksize)
    half = ksize // 2
    arr = image.pixels
    h, w = image.height, image.width
    # rows then columns; clamped index arithmetic keeps it exact for small images
    out = np.zeros_like(arr)
    for t, gt in enumerate(g):
        xs = np.clip(np.arange(w) + t - half, 0, w - 1)
        out += gt * arr[:, xs, :]
    tmp = out
    out = np.zeros_like(arr)
    for t, gt in enumerate(g):
        ys = np.clip(np.arange(h) + t - half, 0, h - 1)
        out += gt * tmp[ys, :, :]
    return HighDimImage.from_array(out)


def normalize_channels(image: HighDimImage, mode: str = "none") -> HighDimImage:
    """Per-channel ``min-max`` to [0, 1] or ``z-score``; constant channels map to 0."""
    if mode == "none":
        return image
    pts = image.points
    if mode == "min-max":
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        span = hi - lo
        safe = np.where(span > 0, span, 1.0)
        out = np.where(span > 0, (pts - lo) / safe, 0.0)
    elif mode == "z-score":
        mu = pts.mean(axis=0)
        sd = pts.std(axis=0)
        safe = np.where(sd > 0, sd, 1.0)
        out = np.where(sd > 0, (pts - mu) / safe, 0.0)
    else:
        raise ValueError(f"unknown normalization {mode!r}")
    return HighDimImage(image.width, image.height, image.channels, out)
