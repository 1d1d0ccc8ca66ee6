"""Multi-crop geometry around a query point and the pluggable featurizer.

Three crops condition every prediction: a square of side = image height
centered on the point, a square of side = half the image height, and the
whole frame. The default featurizer is a seeded random projection of a 16x16
grayscale resample; anything with the same ``(image, rect) -> vector``
signature can stand in for it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfBoundsError, ShapeError


@dataclass(frozen=True)
class Rect:
    """Pixel rectangle: top-left corner plus size, x right, y down."""

    x0: int
    y0: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ShapeError(f"rectangle must have positive area, got {self}")


@dataclass(frozen=True)
class CropSpec:
    """The three conditioning rectangles plus whether clamping moved them."""

    full: Rect
    half: Rect
    whole: Rect
    full_clamped: bool
    half_clamped: bool


def _square_at(px: float, py: float, side: int, width: int, height: int) -> tuple[Rect, bool]:
    side_x = min(side, width)
    side_y = min(side, height)
    x0 = int(round(px - side_x / 2.0))
    y0 = int(round(py - side_y / 2.0))
    cx0 = min(max(x0, 0), width - side_x)
    cy0 = min(max(y0, 0), height - side_y)
    clamped = (cx0 != x0) or (cy0 != y0) or side_x != side or side_y != side
    return Rect(cx0, cy0, side_x, side_y), clamped


def make_crops(width: int, height: int, point) -> CropSpec:
    """Build the three crops for a query point inside a width x height image.

    Clamping shifts a window back inside the frame rather than padding, so the
    crop keeps its area whenever the requested side fits the image at all.
    """
    px, py = float(point[0]), float(point[1])
    if not (0 <= px < width and 0 <= py < height):
        raise OutOfBoundsError(f"point ({px}, {py}) outside {width}x{height} image")
    full, full_clamped = _square_at(px, py, height, width, height)
    half, half_clamped = _square_at(px, py, max(1, height // 2), width, height)
    whole = Rect(0, 0, width, height)
    return CropSpec(full, half, whole, full_clamped, half_clamped)


def to_grayscale(image: np.ndarray) -> np.ndarray:
    """Float64 grayscale in [0, 1] from an (H, W) or (H, W, 3) uint8/float array."""
    a = np.asarray(image, dtype=np.float64)
    if a.ndim == 3:
        a = a.mean(axis=2)
    if a.ndim != 2:
        raise ShapeError(f"image must be (H, W) or (H, W, C), got {a.shape}")
    if a.max() > 1.0:
        a = a / 255.0
    return a


def bilinear_resize(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Deterministic bilinear resample with pixel-center sampling."""
    src = np.asarray(image, dtype=np.float64)
    h, w = src.shape
    ys = (np.arange(out_h) + 0.5) * h / out_h - 0.5
    xs = (np.arange(out_w) + 0.5) * w / out_w - 0.5
    ys = np.clip(ys, 0, h - 1)
    xs = np.clip(xs, 0, w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = src[np.ix_(y0, x0)] * (1 - fx) + src[np.ix_(y0, x1)] * fx
    bot = src[np.ix_(y1, x0)] * (1 - fx) + src[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bot * fy


class RandomProjectionFeaturizer:
    """Default featurizer: 16x16 grayscale resample of the crop, flattened,
    pushed through a fixed seeded random projection, then L2-normalized.

    Deterministic per (image, crop, seed); a zero crop maps to the zero
    vector. ``dim`` defaults to 64.
    """

    PATCH = 16

    def __init__(self, dim: int = 64, seed: int = 0):
        if dim < 1:
            raise ShapeError("feature dimension must be >= 1")
        self.dim = dim
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.projection = rng.standard_normal((self.PATCH * self.PATCH, dim))

    def __call__(self, image: np.ndarray, rect: Rect) -> np.ndarray:
        gray = to_grayscale(image)
        h, w = gray.shape
        if rect.x0 < 0 or rect.y0 < 0 or rect.x0 + rect.w > w or rect.y0 + rect.h > h:
            raise ShapeError(f"crop {rect} outside {w}x{h} image")
        patch = gray[rect.y0:rect.y0 + rect.h, rect.x0:rect.x0 + rect.w]
        resized = bilinear_resize(patch, self.PATCH, self.PATCH)
        v = resized.ravel() @ self.projection
        norm = np.linalg.norm(v)
        return v / norm if norm > 0 else v


def condition_features(image: np.ndarray, point, featurizer) -> np.ndarray:
    """Stacked (3, F) features for the full/half/whole crops at a point."""
    h, w = to_grayscale(image).shape
    crops = make_crops(w, h, point)
    return np.stack([
        featurizer(image, crops.full),
        featurizer(image, crops.half),
        featurizer(image, crops.whole),
    ])


def load_image(path) -> np.ndarray:
    """Read a raster file into an (H, W, 3) uint8 array."""
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))
