"""Screenshot pre-processing: grayscale, binarization, segmentation.

Pipeline stages: RGB -> grayscale (BT.601 luma), global threshold selection
(between-class variance maximization), inverse binarization (dark text on a
light background becomes white foreground), rectangular dilation to fuse
glyphs into text blocks, 8-connected component extraction, innermost-box and
minimum-size filtering, and a top-to-bottom / left-to-right scan ordering of
the surviving boxes.

All operations are pure functions over effectively immutable inputs and are
safe to run concurrently across images.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels

_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True, eq=False)
class RasterImage:
    """RGB pixel buffer: uint8 array of shape (height, width, 3), row-major.

    Treat the buffer as immutable once wrapped.
    """

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 3 or p.dtype != np.uint8:
            raise ValueError(f"expected (h, w, 3) uint8 buffer, got {p.shape} {p.dtype}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("image must be at least 1x1")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def from_file(cls, path: str | Path) -> "RasterImage":
        """Decode a PNG or JPEG file."""
        from PIL import Image

        with Image.open(path) as im:
            return cls(np.asarray(im.convert("RGB"), dtype=np.uint8))


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit intensity buffer: uint8 array of shape (height, width)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 2 or p.dtype != np.uint8:
            raise ValueError(f"expected (h, w) uint8 buffer, got {p.shape} {p.dtype}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("image must be at least 1x1")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class BinaryImage:
    """Two-level buffer; 255 marks foreground (candidate text)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 2 or p.dtype != np.uint8:
            raise ValueError(f"expected (h, w) uint8 buffer, got {p.shape} {p.dtype}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if not np.isin(p, (0, 255)).all():
            raise ValueError("binary image pixels must be 0 or 255")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned rectangle in image coordinates, 0-based top-left origin."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError("box must be at least 1x1")

    def contains(self, other: "BoundingBox") -> bool:
        """True when every edge of ``other`` lies inside or on this box."""
        return (
            self.x <= other.x
            and self.y <= other.y
            and other.x + other.w <= self.x + self.w
            and other.y + other.h <= self.y + self.h
        )


@dataclass(frozen=True)
class SegmentationParams:
    """Tunable segmentation knobs.

    The dilation kernel and minimum-size filters have no canonical values;
    the defaults merge intra-word gaps at typical phone DPI and drop
    single-glyph specks. All are exposed for sensitivity analysis.
    """

    kernel_width: int = 3
    kernel_height: int = 3
    iterations: int = 2
    min_area: int = 64
    min_width: int = 8
    min_height: int = 8

    def __post_init__(self):
        if self.kernel_width < 1 or self.kernel_height < 1:
            raise ValueError("kernel dims must be >= 1")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if min(self.min_area, self.min_width, self.min_height) < 0:
            raise ValueError("minimum-size filters must be >= 0")


def to_grayscale(img: RasterImage) -> GrayImage:
    """BT.601 luma: round-half-up of 0.299 R + 0.587 G + 0.114 B."""
    luma = img.pixels.astype(np.float64) @ _LUMA_WEIGHTS
    gray = np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)
    return GrayImage(gray)


def otsu_threshold(img: GrayImage) -> int:
    """Threshold maximizing between-class variance; smallest wins ties.

    Classes are pixels <= t versus pixels > t. A single-intensity image
    (e.g. a blank screenshot) returns that intensity.
    """
    hist = np.bincount(img.pixels.ravel(), minlength=256).astype(np.int64)
    nonzero = np.nonzero(hist)[0]
    if nonzero.size == 1:
        return int(nonzero[0])
    total = int(hist.sum())
    n0 = np.cumsum(hist)
    m0 = np.cumsum(hist * np.arange(256, dtype=np.int64))
    n1 = total - n0
    m_total = m0[-1]
    valid = (n0 > 0) & (n1 > 0)
    sigma = np.full(256, -1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = m0 / n0
        mu1 = (m_total - m0) / n1
        s = (n0 / total) * (n1 / total) * (mu0 - mu1) ** 2
    sigma[valid] = s[valid]
    return int(np.argmax(sigma))


def binarize_inverse(img: GrayImage, t: int) -> BinaryImage:
    """Pixels at or below the threshold become foreground (255)."""
    if not 0 <= t <= 255:
        raise ValueError(f"threshold {t} outside [0, 255]")
    return BinaryImage(np.where(img.pixels <= t, 255, 0).astype(np.uint8))


def dilate(img: BinaryImage, params: SegmentationParams) -> BinaryImage:
    """Morphological dilation by a filled rectangle, repeated ``iterations`` times.

    Pixels beyond the border are background. For even kernel sizes the window
    extends one pixel further right/down than left/up.
    """
    left = (params.kernel_width - 1) // 2
    right = params.kernel_width // 2
    top = (params.kernel_height - 1) // 2
    bottom = params.kernel_height // 2
    out = img.pixels
    for _ in range(params.iterations):
        out = kernels.dilate_once(out, left, right, top, bottom)
    return BinaryImage(out.copy() if out is img.pixels else out)


def connected_components(img: BinaryImage) -> list[BoundingBox]:
    """Tight boxes of the 8-connected foreground components, unordered."""
    rows = kernels.label_boxes(img.pixels)
    return [BoundingBox(int(x), int(y), int(w), int(h)) for x, y, w, h in rows]


def filter_innermost(
    boxes: list[BoundingBox], params: SegmentationParams
) -> list[BoundingBox]:
    """Drop boxes nested inside a retained box, and boxes below the size minima.

    Partial overlaps survive. For identical boxes the earliest in input order
    is kept.
    """
    sized = [
        b
        for b in boxes
        if b.w * b.h >= params.min_area and b.w >= params.min_width and b.h >= params.min_height
    ]
    kept = []
    for i, box in enumerate(sized):
        swallowed = False
        for j, other in enumerate(sized):
            if j == i:
                continue
            if other.contains(box) and (other != box or j < i):
                swallowed = True
                break
        if not swallowed:
            kept.append(box)
    return kept


def scan_order(boxes: list[BoundingBox]) -> list[BoundingBox]:
    """Stable top-to-bottom, left-to-right ordering: sort key (y, x, w, h)."""
    return sorted(boxes, key=lambda b: (b.y, b.x, b.w, b.h))


def segment(
    img: RasterImage, params: SegmentationParams = SegmentationParams()
) -> list[tuple[BoundingBox, GrayImage]]:
    """Full pre-processing chain; returns ordered (box, grayscale crop) pairs.

    A single-intensity screenshot (a blank screen) yields no segments: with
    every pixel in one class the inverse threshold cannot separate text from
    background, so there is nothing to feed the recognizer.
    """
    gray = to_grayscale(img)
    if np.unique(gray.pixels).size == 1:
        return []
    t = otsu_threshold(gray)
    binary = binarize_inverse(gray, t)
    dilated = dilate(binary, params)
    boxes = scan_order(filter_innermost(connected_components(dilated), params))
    out = []
    for box in boxes:
        crop = gray.pixels[box.y:box.y + box.h, box.x:box.x + box.w]
        out.append((box, GrayImage(np.ascontiguousarray(crop))))
    return out
