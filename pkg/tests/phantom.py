"""Synthetic chest phantom: ellipsoidal lung field plus two spherical
lesions, with the matching label volume."""

import numpy as np

LESION_CENTERS = ((20, 32, 20), (44, 32, 44))
LESION_RADIUS = 6


def _ball(shape, center, radii):
    grids = np.ogrid[tuple(slice(0, s) for s in shape)]
    acc = sum(((g - c) / r) ** 2 for g, c, r in zip(grids, center, radii))
    return acc <= 1.0


def build_phantom(size=64):
    """Returns (ct, mask) int16/uint8 arrays of shape (size, size, size)."""
    shape = (size, size, size)
    ct = np.full(shape, -1000, dtype=np.int16)
    c = size // 2
    lung = _ball(shape, (c, c, c), (size * 0.42, size * 0.30, size * 0.42))
    ct[lung] = -800
    mask = np.zeros(shape, dtype=np.uint8)
    scale = size / 64.0
    for cx, cy, cz in LESION_CENTERS:
        ball = _ball(
            shape,
            (cx * scale, cy * scale, cz * scale),
            (LESION_RADIUS * scale,) * 3,
        )
        ct[ball] = -100
        mask[ball] = 1
    return ct, mask
