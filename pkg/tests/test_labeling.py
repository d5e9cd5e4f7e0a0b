import numpy as np
import pytest

from ctxray.dataset import rasterize_polygon
from ctxray.evaluation import iou
from ctxray.labeling import (
    LabelingConfig,
    build_annotations,
    connected_components,
    extract_polygon,
    select_instances,
)

from oracles import bfs_components


def label_sets(cm):
    return {
        frozenset(map(tuple, np.argwhere(cm.labels == cid)))
        for cid in range(1, cm.count + 1)
    }


def random_blob(rng, size=48, n_disks=6):
    """Smooth-ish random blob: union of overlapping disks."""
    yy, xx = np.mgrid[0:size, 0:size]
    mask = np.zeros((size, size), dtype=bool)
    cx0, cy0 = rng.integers(12, size - 12, size=2)
    for _ in range(n_disks):
        cx = int(np.clip(cx0 + rng.integers(-6, 7), 4, size - 4))
        cy = int(np.clip(cy0 + rng.integers(-6, 7), 4, size - 4))
        r = int(rng.integers(3, 8))
        mask |= (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
    return mask


# -- connected components -----------------------------------------------------


def test_empty_mask_has_no_components():
    cm = connected_components(np.zeros((5, 5), dtype=bool))
    assert cm.count == 0 and not cm.labels.any()


def test_two_blobs_get_raster_order_ids():
    m = np.zeros((6, 6), dtype=bool)
    m[0:2, 0:2] = True
    m[4:6, 4:6] = True
    cm = connected_components(m)
    assert cm.count == 2
    assert cm.labels[0, 0] == 1 and cm.labels[4, 4] == 2


def test_diagonal_pair_connectivity():
    m = np.zeros((3, 3), dtype=bool)
    m[0, 0] = m[1, 1] = True
    assert connected_components(m, 8).count == 1
    assert connected_components(m, 4).count == 2


@pytest.mark.parametrize("connectivity", [4, 8])
def test_matches_bfs_oracle(rng, connectivity):
    for _ in range(30):
        m = rng.random((24, 24)) < rng.uniform(0.05, 0.55)
        cm = connected_components(m, connectivity)
        want = set(bfs_components(m, connectivity))
        assert label_sets(cm) == want


def test_count_invariant_under_translation_and_rotation(rng):
    m = np.zeros((32, 32), dtype=bool)
    m[4:9, 4:9] = True
    m[20:22, 10:15] = True
    m[12, 25] = True
    base = connected_components(m).count
    shifted = np.roll(np.roll(m, 3, axis=0), 5, axis=1)
    assert connected_components(shifted).count == base
    for k in range(1, 4):
        assert connected_components(np.rot90(m, k)).count == base


def test_large_region_no_recursion_limit():
    m = np.ones((300, 300), dtype=bool)
    assert connected_components(m).count == 1


# -- polygon extraction -------------------------------------------------------


def polygon_is_simple(poly):
    """No two non-adjacent edges properly intersect. Vertex-touching
    (from regions diagonally pinched together) is tolerated."""
    n = len(poly)

    def seg(i):
        return poly[i], poly[(i + 1) % n]

    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return (v > 0) - (v < 0)

    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            a, b = seg(i)
            c, d = seg(j)
            if orient(a, b, c) != orient(a, b, d) and orient(c, d, a) != orient(c, d, b):
                # proper crossing unless they merely share a coordinate
                if len({a, b, c, d}) == 4:
                    return False
    return True


def test_single_pixel_unit_square():
    m = np.zeros((8, 8), dtype=bool)
    m[4, 3] = True  # pixel at x=3, y=4
    poly = extract_polygon(m)
    assert poly == [(3.0, 4.0), (4.0, 4.0), (4.0, 5.0), (3.0, 5.0)]


def test_filled_square_simplifies_to_four_vertices():
    m = np.zeros((8, 8), dtype=bool)
    m[2:5, 3:6] = True
    poly = extract_polygon(m, simplify_eps=1.0)
    assert len(poly) == 4
    assert set(poly) == {(3.0, 2.0), (6.0, 2.0), (6.0, 5.0), (3.0, 5.0)}


def test_l_pentomino_keeps_six_corners():
    # standard Douglas-Peucker at eps 1.0 would smooth a one-pixel jog
    # away, so the rectilinear shape is checked at a smaller tolerance
    m = np.zeros((8, 8), dtype=bool)
    m[1:5, 2] = True
    m[4, 3] = True
    poly = extract_polygon(m, simplify_eps=0.5)
    assert len(poly) == 6
    assert set(poly) == {
        (2.0, 1.0),
        (3.0, 1.0),
        (3.0, 4.0),
        (4.0, 4.0),
        (4.0, 5.0),
        (2.0, 5.0),
    }


def test_polygon_fidelity_on_random_blobs(rng):
    for _ in range(30):
        drawn = random_blob(rng)
        cm = connected_components(drawn)
        areas = np.bincount(cm.labels.ravel())[1:]
        blob = cm.labels == (int(areas.argmax()) + 1)  # largest piece only
        if blob.sum() < 25:
            continue
        poly = extract_polygon(blob, simplify_eps=1.0)
        assert polygon_is_simple(poly)
        rast = rasterize_polygon(poly, blob.shape[::-1])
        assert iou(rast, blob) >= 0.85


def test_vertices_lie_on_component_boundary_lattice(rng):
    blob = random_blob(rng)
    h, w = blob.shape
    for x, y in extract_polygon(blob, simplify_eps=1.0):
        xi, yi = int(x), int(y)
        touching = [
            blob[py, px]
            for px in (xi - 1, xi)
            for py in (yi - 1, yi)
            if 0 <= px < w and 0 <= py < h
        ]
        assert any(touching), f"vertex ({x},{y}) not adjacent to the component"


# -- instance selection -------------------------------------------------------


def components_with_areas(areas, gap=3):
    """Horizontal strips of 1xN pixels, raster order = list order."""
    w = max(areas) + 2
    m = np.zeros((gap * len(areas) + 2, w), dtype=bool)
    for i, a in enumerate(areas):
        m[1 + gap * i, 1 : 1 + a] = True
    return connected_components(m)


def test_select_filters_small_and_sorts_by_area():
    cm = components_with_areas([100, 10, 50])
    out = select_instances(cm, min_area=16, max_instances=15)
    assert [i.pixel_count for i in out] == [100, 50]
    assert [i.component_id for i in out] == [1, 3]


def test_select_tie_breaks_by_raster_id():
    cm = components_with_areas([20] * 17)
    out = select_instances(cm, min_area=16, max_instances=15)
    assert [i.component_id for i in out] == list(range(1, 16))


def test_select_empty():
    cm = connected_components(np.zeros((4, 4), dtype=bool))
    assert select_instances(cm) == []


def test_select_bbox_tightly_bounds():
    m = np.zeros((10, 10), dtype=bool)
    m[2:5, 3:9] = True
    out = select_instances(connected_components(m), min_area=1)
    assert out[0].bbox == (3, 2, 6, 3)


# -- composition --------------------------------------------------------------


def test_build_annotations_empty_mask():
    assert build_annotations(np.zeros((8, 8), dtype=bool)) == []


def test_build_annotations_square():
    m = np.zeros((16, 16), dtype=bool)
    m[3:13, 2:12] = True
    out = build_annotations(m)
    assert len(out) == 1
    inst = out[0]
    assert inst.pixel_count == 100
    assert len(inst.polygon) == 4
    assert set(inst.polygon) == {(2.0, 3.0), (12.0, 3.0), (12.0, 13.0), (2.0, 13.0)}


def test_build_annotations_deterministic(rng):
    m = random_blob(rng) | np.roll(random_blob(rng), 16, axis=1)
    a = build_annotations(m, LabelingConfig(min_area=4))
    b = build_annotations(m, LabelingConfig(min_area=4))
    assert repr(a) == repr(b)


def test_build_annotations_offsets_polygon_to_mask_frame():
    m = np.zeros((20, 20), dtype=bool)
    m[15:18, 14:19] = True
    inst = build_annotations(m, LabelingConfig(min_area=1))[0]
    xs = [p[0] for p in inst.polygon]
    ys = [p[1] for p in inst.polygon]
    assert min(xs) == 14 and max(xs) == 19 and min(ys) == 15 and max(ys) == 18
