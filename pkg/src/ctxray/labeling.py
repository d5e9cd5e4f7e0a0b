"""Instance labeling of projected lesion masks.

A projected binary mask is split into connected opacity regions with an
iterative flood fill, small regions are filtered out, and each surviving
region gets a boundary polygon: the outer contour is traced along pixel
cracks (vertices on the pixel-corner lattice) and then simplified with
Douglas-Peucker.

All arrays here are in image convention: arr[row, col] with x = col,
y = row. Polygon vertices are (x, y) corner coordinates, so pixel (x, y)
occupies the square [x, x+1] x [y, y+1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_R, _D, _L, _U = (1, 0), (0, 1), (-1, 0), (0, -1)
_LEFT = {_R: _U, _U: _L, _L: _D, _D: _R}
_RIGHT = {_R: _D, _D: _L, _L: _U, _U: _R}
# pixels just ahead of a corner, (right-of-travel, left-of-travel),
# as offsets from the corner to the pixel's own (x, y)
_FRONT = {
    _R: ((0, 0), (0, -1)),
    _D: ((-1, 0), (0, 0)),
    _L: ((-1, -1), (-1, 0)),
    _U: ((0, -1), (-1, -1)),
}


@dataclass
class ComponentMap:
    """Per-pixel component ids; 0 is background, ids follow raster order
    of each component's first-encountered pixel."""

    labels: np.ndarray  # int32 [row, col]
    count: int

    @property
    def dims(self) -> tuple[int, int]:
        h, w = self.labels.shape
        return (w, h)


@dataclass
class LesionInstance:
    component_id: int
    pixel_count: int
    bbox: tuple[int, int, int, int]  # (x, y, w, h)
    polygon: list[tuple[float, float]] | None = None


@dataclass
class LabelingConfig:
    connectivity: int = 8
    min_area: int = 16
    max_instances: int = 15
    simplify_eps: float = 1.0

    def __post_init__(self):
        if self.connectivity not in (4, 8):
            raise ValueError(f"connectivity must be 4 or 8, got {self.connectivity}")


def connected_components(mask: np.ndarray, connectivity: int = 8) -> ComponentMap:
    """Label connected foreground regions.

    Scanline flood fill with an explicit stack (no recursion): each pop
    fills a whole horizontal run, then pushes the starts of touching runs
    in the rows above and below. Seeds are taken in raster order, so ids
    match the raster order of each component's first pixel.
    """
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    labels = np.zeros(mask.shape, dtype=np.int32)
    rows = mask.tolist()  # mutable copy; pixels are cleared once labeled
    pad = 1 if connectivity == 8 else 0
    count = 0
    for y0 in range(h):
        row0 = rows[y0]
        x0 = 0
        while True:
            try:
                x0 = row0.index(True, x0)
            except ValueError:
                break
            count += 1
            stack = [(y0, x0)]
            while stack:
                y, x = stack.pop()
                row = rows[y]
                if not row[x]:
                    continue
                lo = x
                while lo > 0 and row[lo - 1]:
                    lo -= 1
                hi = x
                while hi < w - 1 and row[hi + 1]:
                    hi += 1
                labels[y, lo : hi + 1] = count
                row[lo : hi + 1] = [False] * (hi - lo + 1)
                a = max(0, lo - pad)
                b = min(w - 1, hi + pad)
                for ny in (y - 1, y + 1):
                    if 0 <= ny < h:
                        nrow = rows[ny]
                        i = a
                        while i <= b:
                            if nrow[i]:
                                stack.append((ny, i))
                                while i <= b and nrow[i]:
                                    i += 1
                            i += 1
    return ComponentMap(labels=labels, count=count)


def _trace_boundary(comp: np.ndarray, connectivity: int) -> list[tuple[int, int]]:
    """Outer boundary of a component as a closed rectilinear corner walk.

    Foreground stays on the right of the travel direction. Where the
    region is connected only through a diagonal (8-connectivity), the
    walk passes through the shared corner twice; edges never cross, but
    the boundary touches itself at that point.
    """
    h, w = comp.shape
    ys, xs = np.nonzero(comp)
    y0 = int(ys[0])
    x0 = int(xs[ys == y0].min())

    def fg(px: int, py: int) -> bool:
        return 0 <= px < w and 0 <= py < h and comp[py, px]

    start = (x0, y0)
    verts: list[tuple[int, int]] = [start]
    c = (x0 + 1, y0)
    d = _R
    while c != start:
        rf_off, lf_off = _FRONT[d]
        rf = fg(c[0] + rf_off[0], c[1] + rf_off[1])
        lf = fg(c[0] + lf_off[0], c[1] + lf_off[1])
        if rf and lf:
            nd = _LEFT[d]
        elif rf:
            nd = d
        elif lf:
            nd = _LEFT[d] if connectivity == 8 else _RIGHT[d]
        else:
            nd = _RIGHT[d]
        if nd != d:
            verts.append(c)
        c = (c[0] + nd[0], c[1] + nd[1])
        d = nd
    return verts


def _seg_dist(p, a, b) -> float:
    ax, ay = a
    bx, by = b
    px, py = p
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    if L2 == 0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / L2
    t = min(1.0, max(0.0, t))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def _dp_open(pts: list, eps: float) -> list:
    if len(pts) <= 2:
        return list(pts)
    a, b = pts[0], pts[-1]
    k, dmax = 0, -1.0
    for i in range(1, len(pts) - 1):
        d = _seg_dist(pts[i], a, b)
        if d > dmax:
            k, dmax = i, d
    if dmax <= eps:
        return [a, b]
    left = _dp_open(pts[: k + 1], eps)
    right = _dp_open(pts[k:], eps)
    return left[:-1] + right


def extract_polygon(
    component: np.ndarray,
    simplify_eps: float = 1.0,
    connectivity: int = 8,
) -> list[tuple[float, float]]:
    """Boundary polygon of a single component (bool image array).

    Returns an open vertex list (closure implied) with vertices on the
    pixel-corner lattice. Douglas-Peucker runs on the closed ring, split
    at the vertex farthest from the first corner; degenerate
    simplifications fall back to the unsimplified ring.
    """
    comp = np.asarray(component, dtype=bool)
    if not comp.any():
        raise ValueError("component has no pixels")
    ring = _trace_boundary(comp, connectivity)
    if simplify_eps > 0 and len(ring) > 4:
        p0 = ring[0]
        k = max(
            range(1, len(ring)),
            key=lambda i: (ring[i][0] - p0[0]) ** 2 + (ring[i][1] - p0[1]) ** 2,
        )
        half1 = _dp_open(ring[: k + 1], simplify_eps)
        half2 = _dp_open(ring[k:] + [ring[0]], simplify_eps)
        simplified = half1[:-1] + half2[:-1]
        if len(simplified) >= 3:
            ring = simplified
    return [(float(x), float(y)) for x, y in ring]


def _bbox_of(comp_pixels: tuple[np.ndarray, np.ndarray]) -> tuple[int, int, int, int]:
    ys, xs = comp_pixels
    x0, x1 = int(xs.min()), int(xs.max())
    y0, y1 = int(ys.min()), int(ys.max())
    return (x0, y0, x1 - x0 + 1, y1 - y0 + 1)


def select_instances(
    cm: ComponentMap,
    min_area: int = 16,
    max_instances: int = 15,
) -> list[LesionInstance]:
    """Filter small components, keep the largest, order by area desc.

    Ties break toward the smaller (earlier raster) id.
    """
    if cm.count == 0:
        return []
    areas = np.bincount(cm.labels.ravel(), minlength=cm.count + 1)
    kept = [cid for cid in range(1, cm.count + 1) if areas[cid] >= min_area]
    kept.sort(key=lambda cid: (-int(areas[cid]), cid))
    kept = kept[:max_instances]
    out = []
    for cid in kept:
        pix = np.nonzero(cm.labels == cid)
        out.append(
            LesionInstance(
                component_id=cid,
                pixel_count=int(areas[cid]),
                bbox=_bbox_of(pix),
            )
        )
    return out


def build_annotations(
    mask: np.ndarray,
    config: LabelingConfig = LabelingConfig(),
) -> list[LesionInstance]:
    """Full mask-to-instances pipeline: label, select, trace polygons."""
    cm = connected_components(mask, config.connectivity)
    instances = select_instances(cm, config.min_area, config.max_instances)
    for inst in instances:
        x, y, w, h = inst.bbox
        crop = cm.labels[y : y + h, x : x + w] == inst.component_id
        poly = extract_polygon(crop, config.simplify_eps, config.connectivity)
        inst.polygon = [(px + x, py + y) for px, py in poly]
    return instances
