"""Seeded offline augmentation of (image, polygon annotations) pairs.

Operations run in a fixed order: horizontal flip, random crop (resized
back to the original frame), Gaussian blur, linear contrast, per-channel
gains, affine (scale, rotate, shear). Geometric ops move polygon
vertices through the exact same affine mapping as the pixels; photometric
ops never touch annotations. Every stochastic choice is a pure function
of (seed, image_id, copy) via the toolkit's named RNG substreams.

Coordinates are continuous image coordinates where pixel (i, j) covers
[i, i+1] x [j, j+1]; OpenCV's center-at-integer convention is adjusted
for when warping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import cv2
import numpy as np
from shapely.geometry import MultiPolygon, Polygon, box

from .projection import Image8, _bilinear_axis

FLIP_P = 0.5
CROP_MAX_FRACTION = 0.10
BLUR_P = 0.5
BLUR_SIGMA_MAX = 0.5
CONTRAST_RANGE = (0.9, 1.1)
GAINS_P = 0.2
GAINS_RANGE = (0.8, 1.2)
SCALE_RANGE = (0.8, 1.2)
ROTATION_RANGE_DEG = (-10.0, 10.0)
SHEAR_RANGE_DEG = (-2.0, 2.0)

MIN_CLIPPED_AREA = 1.0


@dataclass(frozen=True)
class AugmentationParams:
    flip: bool
    crop_fractions: tuple[float, float, float, float]  # left, top, right, bottom
    blur_sigma: float | None
    contrast_alpha: float
    channel_gains: tuple[float, float, float] | None
    scale: tuple[float, float]
    rotation_deg: float
    shear_deg: float

    @classmethod
    def identity(cls) -> "AugmentationParams":
        return cls(
            flip=False,
            crop_fractions=(0.0, 0.0, 0.0, 0.0),
            blur_sigma=None,
            contrast_alpha=1.0,
            channel_gains=None,
            scale=(1.0, 1.0),
            rotation_deg=0.0,
            shear_deg=0.0,
        )


def sample_params(seed: int, image_id, copy: int = 0) -> AugmentationParams:
    """Draw one parameter set; identical (seed, image_id, copy) always
    yields identical params. Draw order is fixed and documented by the
    source order below."""
    from .rng import substream

    rng = substream(seed, image_id, copy, "augment")
    flip = bool(rng.random() < FLIP_P)
    crop = tuple(float(v) for v in rng.uniform(0.0, CROP_MAX_FRACTION, size=4))
    blur_sigma = None
    if rng.random() < BLUR_P:
        blur_sigma = float(rng.uniform(0.0, BLUR_SIGMA_MAX))
    alpha = float(rng.uniform(*CONTRAST_RANGE))
    gains = None
    if rng.random() < GAINS_P:
        gains = tuple(float(v) for v in rng.uniform(*GAINS_RANGE, size=3))
    scale = tuple(float(v) for v in rng.uniform(*SCALE_RANGE, size=2))
    rot = float(rng.uniform(*ROTATION_RANGE_DEG))
    shear = float(rng.uniform(*SHEAR_RANGE_DEG))
    return AugmentationParams(flip, crop, blur_sigma, alpha, gains, scale, rot, shear)


# -- affine helpers ----------------------------------------------------------


def _flip_matrix(w: int) -> np.ndarray:
    return np.array([[-1.0, 0.0, float(w)], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


def _crop_box(w: int, h: int, fractions) -> tuple[int, int, int, int]:
    l, t, r, b = fractions
    x0 = int(round(l * w))
    y0 = int(round(t * h))
    x1 = w - int(round(r * w))
    y1 = h - int(round(b * h))
    return x0, y0, max(x1, x0 + 1), max(y1, y0 + 1)


def _crop_matrix(w: int, h: int, crop: tuple[int, int, int, int]) -> np.ndarray:
    x0, y0, x1, y1 = crop
    sx = w / (x1 - x0)
    sy = h / (y1 - y0)
    return np.array([[sx, 0.0, -sx * x0], [0.0, sy, -sy * y0], [0.0, 0.0, 1.0]])


def _affine_matrix(w: int, h: int, params: AugmentationParams) -> np.ndarray:
    """Scale, then shear, then rotate, all about the image center.

    Positive rotation is clockwise on screen (y axis points down).
    """
    sx, sy = params.scale
    th = math.radians(params.rotation_deg)
    sh = math.tan(math.radians(params.shear_deg))
    scale = np.array([[sx, 0.0, 0.0], [0.0, sy, 0.0], [0.0, 0.0, 1.0]])
    shear = np.array([[1.0, sh, 0.0], [sh, 1.0, 0.0], [0.0, 0.0, 1.0]])
    rot = np.array(
        [
            [math.cos(th), -math.sin(th), 0.0],
            [math.sin(th), math.cos(th), 0.0],
            [0.0, 0.0, 1.0],
        ]
    )
    cx, cy = w / 2.0, h / 2.0
    to_origin = np.array([[1.0, 0.0, -cx], [0.0, 1.0, -cy], [0.0, 0.0, 1.0]])
    back = np.array([[1.0, 0.0, cx], [0.0, 1.0, cy], [0.0, 0.0, 1.0]])
    return back @ rot @ shear @ scale @ to_origin


def _is_identity_affine(params: AugmentationParams) -> bool:
    return (
        params.scale == (1.0, 1.0)
        and params.rotation_deg == 0.0
        and params.shear_deg == 0.0
    )


def _cv_matrix(m: np.ndarray) -> np.ndarray:
    # continuous (corner-lattice) frame -> OpenCV center-at-integer frame
    a = m[:2, :2]
    t = m[:2, 2] + (a - np.eye(2)) @ np.array([0.5, 0.5])
    return np.hstack([a, t[:, None]]).astype(np.float64)


def _resize_bilinear(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = arr.shape[:2]
    r0, r1, wr = _bilinear_axis(h, out_h)
    c0, c1, wc = _bilinear_axis(w, out_w)
    a = arr.astype(np.float64)
    rows = a[r0] * (1 - wr)[:, None] + a[r1] * wr[:, None]
    out = rows[:, c0] * (1 - wc)[None, :] + rows[:, c1] * wc[None, :]
    return np.floor(out + 0.5).clip(0, 255).astype(np.uint8)


def transform_polygon(polygon, m: np.ndarray) -> list[tuple[float, float]]:
    pts = np.asarray(polygon, dtype=np.float64)
    out = pts @ m[:2, :2].T + m[:2, 2]
    return [(float(x), float(y)) for x, y in out]


def clip_polygon(polygon, w: int, h: int) -> list[tuple[float, float]] | None:
    """Intersect with the image rectangle; None when the clipped area is
    below the drop threshold. Self-touching rings are repaired first; a
    multi-piece result keeps its largest piece."""
    poly = Polygon(polygon)
    if not poly.is_valid:
        poly = poly.buffer(0)
    clipped = poly.intersection(box(0.0, 0.0, float(w), float(h)))
    if isinstance(clipped, MultiPolygon):
        clipped = max(clipped.geoms, key=lambda g: g.area)
    if clipped.is_empty or clipped.area < MIN_CLIPPED_AREA or not isinstance(clipped, Polygon):
        return None
    coords = list(clipped.exterior.coords)[:-1]
    if len(coords) < 3:
        return None
    return [(float(x), float(y)) for x, y in coords]


def apply_augmentation(
    image: Image8,
    annotations: list[list[tuple[float, float]]],
    params: AugmentationParams,
) -> tuple[Image8, list[list[tuple[float, float]]]]:
    """Apply one sampled parameter set to an image and its polygons.

    Identity parameters return bit-identical pixels and annotations.
    Geometric ops compose into one affine applied to polygon vertices;
    clipped instances below 1 px of area are dropped.
    """
    pixels = image.pixels
    h, w = pixels.shape[:2]
    m = np.eye(3)
    geometric = False

    if params.flip:
        pixels = np.ascontiguousarray(pixels[:, ::-1])
        m = _flip_matrix(w) @ m
        geometric = True

    crop = _crop_box(w, h, params.crop_fractions)
    if crop != (0, 0, w, h):
        x0, y0, x1, y1 = crop
        pixels = _resize_bilinear(pixels[y0:y1, x0:x1], h, w)
        m = _crop_matrix(w, h, crop) @ m
        geometric = True

    if params.blur_sigma is not None and params.blur_sigma > 1e-6:
        pixels = cv2.GaussianBlur(pixels, (0, 0), params.blur_sigma)

    if params.contrast_alpha != 1.0:
        out = (pixels.astype(np.float64) - 128.0) * params.contrast_alpha + 128.0
        pixels = np.floor(out + 0.5).clip(0, 255).astype(np.uint8)

    if params.channel_gains is not None:
        if pixels.ndim == 2:
            pixels = np.stack([pixels] * 3, axis=-1)
        gains = np.array(params.channel_gains)
        out = pixels.astype(np.float64) * gains[None, None, :]
        pixels = np.floor(out + 0.5).clip(0, 255).astype(np.uint8)

    if not _is_identity_affine(params):
        am = _affine_matrix(w, h, params)
        pixels = cv2.warpAffine(
            pixels,
            _cv_matrix(am),
            (w, h),
            flags=cv2.INTER_LINEAR,
            borderMode=cv2.BORDER_CONSTANT,
            borderValue=0,
        )
        m = am @ m
        geometric = True

    if geometric:
        out_polys = []
        for poly in annotations:
            moved = transform_polygon(poly, m)
            clipped = clip_polygon(moved, w, h)
            if clipped is not None:
                out_polys.append(clipped)
    else:
        out_polys = annotations

    return Image8(pixels=pixels, provenance=image.provenance), out_polys


def render_overlay(image: Image8, annotations) -> np.ndarray:
    """Side-by-side BGR panel: raw image | image with polygon outlines."""
    gray = image.pixels if image.pixels.ndim == 3 else np.stack([image.pixels] * 3, -1)
    drawn = gray.copy()
    for poly in annotations:
        pts = np.asarray(poly, dtype=np.float64) - 0.5  # center-at-integer for cv2
        cv2.polylines(drawn, [np.round(pts).astype(np.int32)], True, (0, 0, 255), 1)
    return np.hstack([gray, drawn])
