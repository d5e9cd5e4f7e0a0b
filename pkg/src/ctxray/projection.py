"""Coronal re-projection of CT and mask volumes.

The projection collapses the anterior-posterior axis by plain summation
of (optionally HU-clamped) voxel values, producing an X-by-Z accumulator
that resembles a frontal radiograph once normalized to 8 bits. Masks are
collapsed by counting nonzero voxels per column.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidOrientation
from .volume_io import ROLE_AP, ROLE_LR, ROLE_SI, MaskVolume, Volume3D

# Default pre-projection Hounsfield clamp. Without it, metal and dense
# bone dominate the min-max normalization and wash out lung texture.
DEFAULT_WINDOW = (-1024.0, 600.0)


@dataclass(frozen=True)
class WindowSpec:
    """Hounsfield clamp bounds applied to every voxel before summation."""

    hu_min: float
    hu_max: float

    def __post_init__(self):
        if not self.hu_min < self.hu_max:
            raise ValueError(f"hu_min {self.hu_min} must be < hu_max {self.hu_max}")


@dataclass
class Projection2D:
    """The coronal accumulator. values[x, z], x: columns, z: rows."""

    values: np.ndarray
    pixel_spacing: tuple[float, float]  # (sx, sz) mm

    @property
    def dims(self) -> tuple[int, int]:
        return self.values.shape  # (X, Z)

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ValueError("projection values must be 2D")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("projection contains non-finite values")


@dataclass
class Image8:
    """8-bit grayscale rendering; pixels[row, col] (rows = z, cols = x)."""

    pixels: np.ndarray
    provenance: str = "projected"  # "real" | "projected"

    @property
    def dims(self) -> tuple[int, int]:
        h, w = self.pixels.shape[:2]
        return (w, h)


def _oriented_plane(vol: Volume3D, plane: np.ndarray, flip_x, flip_z) -> np.ndarray:
    """Reorder a (lr_axis, si_axis) plane into display-consistent (x, z)."""
    fx = vol.flips[ROLE_LR] if flip_x is None else flip_x
    fz = vol.flips[ROLE_SI] if flip_z is None else flip_z
    if fx:
        plane = plane[::-1, :]
    if fz:
        plane = plane[:, ::-1]
    return np.ascontiguousarray(plane)


def _axes(vol: Volume3D) -> tuple[int, int, int]:
    try:
        return (
            vol.axis_roles[ROLE_LR],
            vol.axis_roles[ROLE_AP],
            vol.axis_roles[ROLE_SI],
        )
    except KeyError as e:
        raise InvalidOrientation(f"missing axis role: {e}") from e


def project_coronal(
    vol: Volume3D,
    window: WindowSpec | None = WindowSpec(*DEFAULT_WINDOW),
    flip_x: bool | None = None,
    flip_z: bool | None = None,
) -> Projection2D:
    """Sum clamped voxels along the anterior-posterior axis.

    Accumulation runs in int64 for integer volumes and float64 for float
    volumes so 512-deep sums neither overflow nor lose precision. The
    output is indexed values[x, z]; flips default to the volume's
    orientation-derived flags and can be forced per axis.
    """
    lr, ap, si = _axes(vol)
    v = vol.voxels
    if window is not None:
        v = np.clip(v, window.hu_min, window.hu_max)
    acc_dtype = np.float64 if np.issubdtype(v.dtype, np.floating) else np.int64
    summed = v.sum(axis=ap, dtype=acc_dtype)
    # after removing ap, remaining axes keep storage order; put lr first
    lr2 = lr if lr < ap else lr - 1
    plane = summed if lr2 == 0 else summed.T
    plane = _oriented_plane(vol, plane, flip_x, flip_z)
    return Projection2D(
        values=plane,
        pixel_spacing=(vol.spacing[lr], vol.spacing[si]),
    )


def project_mask(
    mask: MaskVolume,
    min_voxels: int = 1,
    flip_x: bool | None = None,
    flip_z: bool | None = None,
) -> np.ndarray:
    """Binary coronal collapse: foreground where an anterior-posterior
    column holds at least `min_voxels` nonzero voxels. Returns bool[x, z].
    """
    lr, ap, si = _axes(mask)
    counts = (mask.voxels != 0).sum(axis=ap, dtype=np.int64)
    lr2 = lr if lr < ap else lr - 1
    plane = counts if lr2 == 0 else counts.T
    plane = _oriented_plane(mask, plane, flip_x, flip_z)
    return plane >= min_voxels


def normalize_to_8bit(p: Projection2D, provenance: str = "projected") -> Image8:
    """Linear min-max map to [0, 255], round half away from zero.

    A constant projection maps to an all-zero image so degenerate
    fixtures still flow through the pipeline.
    """
    v = p.values.astype(np.float64)
    lo, hi = v.min(), v.max()
    if hi == lo:
        out = np.zeros(v.shape, dtype=np.uint8)
    else:
        scaled = (v - lo) / (hi - lo) * 255.0
        out = np.floor(scaled + 0.5).astype(np.uint8)
    # values[x, z] -> pixels[row=z, col=x]
    return Image8(pixels=np.ascontiguousarray(out.T), provenance=provenance)


def _resample_axis_nearest(n_in: int, n_out: int) -> np.ndarray:
    # pixel-area mapping: output pixel center falls in source pixel
    idx = np.floor((np.arange(n_out) + 0.5) * n_in / n_out).astype(np.intp)
    return np.clip(idx, 0, n_in - 1)


def _bilinear_axis(n_in: int, n_out: int):
    c = (np.arange(n_out) + 0.5) * n_in / n_out - 0.5
    c = np.clip(c, 0.0, n_in - 1.0)
    i0 = np.floor(c).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    w = c - i0
    return i0, i1, w


def resample_isotropic(data, spacing: tuple[float, float]):
    """Resample display-space data (rows = z, cols = x) to square pixels.

    Target pitch is min(sx, sz); output dims round(input_dim * ratio).
    Image8 pixels get bilinear interpolation, boolean masks get
    nearest-neighbor. Returns the same kind of object as the input.
    """
    sx, sz = spacing
    if sx <= 0 or sz <= 0:
        raise ValueError(f"spacing must be positive, got {spacing}")
    is_image = isinstance(data, Image8)
    arr = data.pixels if is_image else data
    h, w = arr.shape[:2]
    pitch = min(sx, sz)
    out_h = int(round(h * sz / pitch))
    out_w = int(round(w * sx / pitch))
    if (out_h, out_w) == (h, w):
        out = arr.copy()
    elif is_image:
        r0, r1, wr = _bilinear_axis(h, out_h)
        c0, c1, wc = _bilinear_axis(w, out_w)
        a = arr.astype(np.float64)
        rows = a[r0, :] * (1 - wr)[:, None] + a[r1, :] * wr[:, None]
        out = rows[:, c0] * (1 - wc)[None, :] + rows[:, c1] * wc[None, :]
        out = np.floor(out + 0.5).clip(0, 255).astype(np.uint8)
    else:
        ri = _resample_axis_nearest(h, out_h)
        ci = _resample_axis_nearest(w, out_w)
        out = arr[np.ix_(ri, ci)]
    if is_image:
        return Image8(pixels=out, provenance=data.provenance)
    return out
