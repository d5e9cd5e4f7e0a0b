"""Brute-force reference implementations the fast paths are checked against."""

import math
from collections import deque

import numpy as np
from scipy import integrate, optimize


def project_triple_loop(voxels, hu_min=None, hu_max=None):
    """Coronal projection by explicit x/z/y loops (storage roles assumed:
    x=0 left-right, 1 anterior-posterior, 2 superior-inferior)."""
    nx, ny, nz = voxels.shape
    out = [[0] * nz for _ in range(nx)]
    for x in range(nx):
        for z in range(nz):
            acc = 0
            for y in range(ny):
                v = voxels[x, y, z].item()
                if hu_min is not None and v < hu_min:
                    v = hu_min
                if hu_max is not None and v > hu_max:
                    v = hu_max
                acc += v
            out[x][z] = acc
    return np.array(out)


def mask_column_scan(voxels, min_voxels=1):
    """Foreground where an anterior-posterior column has enough nonzeros."""
    nx, ny, nz = voxels.shape
    out = np.zeros((nx, nz), dtype=bool)
    for x in range(nx):
        for z in range(nz):
            n = 0
            for y in range(ny):
                if voxels[x, y, z] != 0:
                    n += 1
            out[x, z] = n >= min_voxels
    return out


def bfs_components(mask, connectivity):
    """Component pixel sets via breadth-first search, raster-seeded."""
    h, w = mask.shape
    if connectivity == 8:
        nbrs = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    else:
        nbrs = [(-1, 0), (0, -1), (0, 1), (1, 0)]
    seen = np.zeros_like(mask, dtype=bool)
    comps = []
    for y0 in range(h):
        for x0 in range(w):
            if not mask[y0, x0] or seen[y0, x0]:
                continue
            comp = set()
            q = deque([(y0, x0)])
            seen[y0, x0] = True
            while q:
                y, x = q.popleft()
                comp.add((y, x))
                for dy, dx in nbrs:
                    ny, nx = y + dy, x + dx
                    if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        q.append((ny, nx))
            comps.append(frozenset(comp))
    return comps


def t_pdf(x, df):
    c = math.exp(
        math.lgamma((df + 1) / 2.0) - math.lgamma(df / 2.0)
    ) / math.sqrt(df * math.pi)
    return c * (1.0 + x * x / df) ** (-(df + 1) / 2.0)


def t_quantile_quadrature(p, df):
    """Student-t inverse CDF by quadrature of the density plus bisection."""

    def cdf(x):
        val, _ = integrate.quad(t_pdf, 0.0, x, args=(df,))
        return 0.5 + val

    # largest quantile of interest is t(0.995, 1) ~ 63.7; a tight bracket
    # keeps the quadrature from missing the mass concentrated near zero
    return optimize.brentq(lambda x: cdf(x) - p, 0.0, 100.0, xtol=1e-10)
