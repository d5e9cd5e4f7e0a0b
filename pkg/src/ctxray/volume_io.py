"""NIfTI-1 volume reading.

Only single-file NIfTI-1 (".nii" / ".nii.gz") is supported; detached
header pairs ("ni1\\0" magic) and NIfTI-2 are rejected. All header fields
are little-endian; a byte-swapped file is detected through impossible
`dim` values and refused rather than misparsed.

Intensity scaling (scl_slope / scl_inter) is applied here, at read time,
so downstream code never sees raw stored integers when a rescale is
present.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    GeometryMismatch,
    IoFailure,
    MalformedHeader,
    UnsupportedDatatype,
)

HEADER_SIZE = 348

# anatomical axis roles, in NIfTI (R, A, S) world-axis order
ROLE_LR = "left-right"
ROLE_AP = "anterior-posterior"
ROLE_SI = "superior-inferior"
_ROLES = (ROLE_LR, ROLE_AP, ROLE_SI)

_DTYPES = {
    2: np.uint8,
    4: np.int16,
    8: np.int32,
    16: np.float32,
}


@dataclass
class Volume3D:
    """A 3D scalar field with voxel geometry.

    voxels has shape (X, Y, Z) in file storage order (x fastest on disk).
    axis_roles maps each anatomical role to the storage axis index holding
    it; flips says whether that axis must be reversed to land in
    radiographic display orientation (superior at row 0, patient-left at
    image right). When the file carries no orientation transform the
    storage order is assumed display-ready and all flips are False.
    """

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    voxels: np.ndarray
    axis_roles: dict[str, int]
    flips: dict[str, bool] = field(default_factory=dict)

    def __post_init__(self):
        if self.voxels.size != self.dims[0] * self.dims[1] * self.dims[2]:
            raise DimensionMismatch(
                f"voxel count {self.voxels.size} != {self.dims}"
            )
        if any(not np.isfinite(s) or s <= 0 for s in self.spacing):
            raise MalformedHeader(f"non-positive voxel spacing {self.spacing}")
        if sorted(self.axis_roles) != sorted(_ROLES) or sorted(
            self.axis_roles.values()
        ) != [0, 1, 2]:
            raise MalformedHeader(f"axis_roles not a bijection: {self.axis_roles}")
        if not self.flips:
            self.flips = {r: False for r in _ROLES}


# A mask volume shares the representation; nonzero voxels mean lesion.
MaskVolume = Volume3D


def _quaternion_matrix(b: float, c: float, d: float, qfac: float) -> np.ndarray:
    a2 = 1.0 - (b * b + c * c + d * d)
    a = np.sqrt(a2) if a2 > 0 else 0.0
    m = np.array(
        [
            [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
            [2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)],
            [2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - b * b - c * c],
        ]
    )
    m[:, 2] *= -1.0 if qfac < 0 else 1.0
    return m


def _roles_from_directions(dirs: np.ndarray) -> tuple[dict[str, int], dict[str, bool]]:
    """Assign storage axes to anatomical roles by largest |cosine|.

    dirs[:, j] is the world direction of storage axis j (world = RAS).
    Greedy max assignment guarantees a bijection for any non-degenerate
    matrix. A storage axis needs a flip when increasing index runs toward
    Right (for left-right) or Superior (for superior-inferior): display
    convention wants patient-left at image right and superior at row 0.
    """
    m = np.abs(dirs.astype(float))
    roles: dict[str, int] = {}
    flips: dict[str, bool] = {ROLE_AP: False}
    for _ in range(3):
        i, j = np.unravel_index(np.argmax(m), m.shape)
        if m[i, j] == 0:
            raise MalformedHeader("degenerate orientation transform")
        role = _ROLES[i]
        roles[role] = int(j)
        sign = np.sign(dirs[i, j])
        if role == ROLE_LR:
            flips[role] = sign > 0
        elif role == ROLE_SI:
            flips[role] = sign > 0
        m[i, :] = -1.0
        m[:, j] = -1.0
    return roles, flips


def _parse_header(hdr: bytes):
    if len(hdr) < HEADER_SIZE:
        raise MalformedHeader(f"file shorter than {HEADER_SIZE}-byte header")
    magic = hdr[344:348]
    if magic != b"n+1\x00":
        raise MalformedHeader(f"unsupported magic {magic!r} (single-file NIfTI-1 required)")
    (sizeof_hdr,) = struct.unpack_from("<i", hdr, 0)
    dim = struct.unpack_from("<8h", hdr, 40)
    if sizeof_hdr != HEADER_SIZE or not (1 <= dim[0] <= 7):
        raise MalformedHeader(
            "implausible sizeof_hdr/dim values (big-endian or corrupt file)"
        )
    if not (dim[0] == 3 or (dim[0] > 3 and all(d == 1 for d in dim[4 : dim[0] + 1]))):
        raise DimensionMismatch(f"unsupported dim[0]={dim[0]} with dims {dim[1:dim[0]+1]}")
    (datatype,) = struct.unpack_from("<h", hdr, 70)
    if datatype not in _DTYPES:
        raise UnsupportedDatatype(f"datatype code {datatype}")
    pixdim = struct.unpack_from("<8f", hdr, 76)
    (vox_offset,) = struct.unpack_from("<f", hdr, 108)
    scl_slope, scl_inter = struct.unpack_from("<2f", hdr, 112)
    qform_code, sform_code = struct.unpack_from("<2h", hdr, 252)
    quatern = struct.unpack_from("<3f", hdr, 256)
    srow = np.array(
        [
            struct.unpack_from("<4f", hdr, 280),
            struct.unpack_from("<4f", hdr, 296),
            struct.unpack_from("<4f", hdr, 312),
        ]
    )
    return {
        "dims": (dim[1], dim[2], dim[3]),
        "dtype": _DTYPES[datatype],
        "spacing": (float(pixdim[1]), float(pixdim[2]), float(pixdim[3])),
        "qfac": float(pixdim[0]),
        "vox_offset": int(vox_offset),
        "scl": (float(scl_slope), float(scl_inter)),
        "qform_code": qform_code,
        "sform_code": sform_code,
        "quatern": quatern,
        "srow": srow,
    }


def read_nifti(path) -> Volume3D:
    """Parse a single-file NIfTI-1 volume (gzip-wrapped or raw)."""
    try:
        with open(path, "rb") as f:
            prefix = f.read(2)
            f.seek(0)
            if prefix == b"\x1f\x8b":
                with gzip.open(f) as gz:
                    raw = gz.read()
            else:
                raw = f.read()
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e

    h = _parse_header(raw)
    nx, ny, nz = h["dims"]
    if nx <= 0 or ny <= 0 or nz <= 0:
        raise MalformedHeader(f"non-positive dims {h['dims']}")

    dtype = np.dtype(h["dtype"]).newbyteorder("<")
    nbytes = nx * ny * nz * dtype.itemsize
    off = max(h["vox_offset"], HEADER_SIZE)
    if len(raw) < off + nbytes:
        raise IoFailure(f"truncated voxel data in {path}")
    voxels = np.frombuffer(raw, dtype=dtype, count=nx * ny * nz, offset=off)
    voxels = voxels.reshape((nx, ny, nz), order="F")

    slope, inter = h["scl"]
    if slope != 0.0 and not (slope == 1.0 and inter == 0.0):
        voxels = voxels.astype(np.float32) * slope + inter
    else:
        voxels = np.ascontiguousarray(voxels)

    if h["sform_code"] > 0:
        roles, flips = _roles_from_directions(h["srow"][:, :3])
    elif h["qform_code"] > 0:
        rot = _quaternion_matrix(*h["quatern"], h["qfac"])
        roles, flips = _roles_from_directions(rot)
    else:
        # no transform stored: assume axial stacking, storage already in
        # display orientation (x: left-right, y: anterior-posterior,
        # z: superior-inferior)
        roles = {ROLE_LR: 0, ROLE_AP: 1, ROLE_SI: 2}
        flips = {r: False for r in _ROLES}

    return Volume3D(
        dims=(nx, ny, nz),
        spacing=h["spacing"],
        voxels=voxels,
        axis_roles=roles,
        flips=flips,
    )


SPACING_TOL_MM = 1e-3


def pair_mask(ct: Volume3D, mask: MaskVolume) -> tuple[Volume3D, MaskVolume]:
    """Validate that a mask volume shares the CT's geometry."""
    if ct.dims != mask.dims:
        raise GeometryMismatch(f"dims differ: ct {ct.dims} vs mask {mask.dims}")
    for i, (a, b) in enumerate(zip(ct.spacing, mask.spacing)):
        if abs(a - b) > SPACING_TOL_MM:
            raise GeometryMismatch(
                f"spacing[{i}] differs: ct {a} vs mask {b} (tol {SPACING_TOL_MM} mm)"
            )
    return ct, mask
