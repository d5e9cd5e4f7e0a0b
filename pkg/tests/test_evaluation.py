import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctxray.dataset import (
    DatasetManifest,
    ManifestEntry,
    export_coco,
    polygon_to_annotation,
)
from ctxray.errors import DimensionMismatch, ImageSetMismatch, InsufficientSamples
from ctxray.evaluation import (
    evaluate_dataset,
    format_report,
    image_iou,
    iou,
    t_margin,
    t_quantile,
)

from oracles import t_quantile_quadrature


def square(x0, y0, side):
    return [(x0, y0), (x0 + side, y0), (x0 + side, y0 + side), (x0, y0 + side)]


# -- iou -----------------------------------------------------------------------


def test_identical_masks_score_one():
    m = np.zeros((4, 4), dtype=bool)
    m[1:3, 1:3] = True
    assert iou(m, m) == 1.0


def test_disjoint_masks_score_zero():
    a = np.zeros((4, 4), dtype=bool)
    b = np.zeros((4, 4), dtype=bool)
    a[0, 0] = b[3, 3] = True
    assert iou(a, b) == 0.0


def test_offset_squares_score_third():
    a = np.zeros((4, 4), dtype=bool)
    b = np.zeros((4, 4), dtype=bool)
    a[0:2, 0:2] = True
    b[0:2, 1:3] = True
    assert iou(a, b) == pytest.approx(1 / 3)


def test_both_empty_scores_one():
    assert iou(np.zeros((3, 3), bool), np.zeros((3, 3), bool)) == 1.0


def test_one_empty_scores_zero():
    a = np.zeros((3, 3), dtype=bool)
    a[0, 0] = True
    assert iou(a, np.zeros((3, 3), bool)) == 0.0


def test_dim_mismatch():
    with pytest.raises(DimensionMismatch):
        iou(np.zeros((3, 3), bool), np.zeros((3, 4), bool))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**16 - 1), st.integers(0, 2**16 - 1))
def test_iou_symmetric_and_bounded(abits, bbits):
    a = np.array([(abits >> i) & 1 for i in range(16)], dtype=bool).reshape(4, 4)
    b = np.array([(bbits >> i) & 1 for i in range(16)], dtype=bool).reshape(4, 4)
    assert iou(a, b) == iou(b, a)
    assert 0.0 <= iou(a, b) <= 1.0


def test_growing_intersection_never_decreases_iou(rng):
    base = rng.random((8, 8)) < 0.4
    other = rng.random((8, 8)) < 0.4
    union = base | other
    score = iou(base, other)
    grown = other.copy()
    missing = np.argwhere(base & ~other)
    for y, x in missing[: len(missing) // 2]:
        grown[y, x] = True
    assert grown.sum() <= union.sum()
    assert iou(base, grown) >= score


# -- image_iou -----------------------------------------------------------------


def test_image_iou_identical_annotations():
    anns = [polygon_to_annotation(square(1, 1, 3), 1, 1)]
    assert image_iou(anns, anns, (8, 8)) == 1.0


def test_image_iou_empty_prediction():
    gt = [polygon_to_annotation(square(1, 1, 3), 1, 1)]
    assert image_iou([], gt, (8, 8)) == 0.0


def test_image_iou_partial_cover():
    gt = [
        polygon_to_annotation(square(0, 0, 2), 1, 1),
        polygon_to_annotation(square(4, 4, 3), 1, 2),
    ]
    pred = [polygon_to_annotation(square(0, 0, 2), 1, 1)]
    assert image_iou(pred, gt, (8, 8)) == pytest.approx(4 / (4 + 9))


# -- t statistics --------------------------------------------------------------


def test_equal_scores_zero_margin():
    mean, margin = t_margin([0.5, 0.5, 0.5])
    assert mean == 0.5 and margin == 0.0


def test_n2_margin_uses_t1():
    mean, margin = t_margin([0.0, 1.0], confidence=0.95)
    assert mean == 0.5
    s = math.sqrt(0.5)
    assert margin == pytest.approx(12.7062 * s / math.sqrt(2), abs=2e-4)


def test_df39_critical_value():
    assert t_quantile(0.975, 39) == pytest.approx(2.0227, abs=1e-4)


def test_insufficient_samples():
    with pytest.raises(InsufficientSamples):
        t_margin([0.5])


@pytest.mark.parametrize("df", [1, 2, 5, 17, 40, 100])
@pytest.mark.parametrize("p", [0.9, 0.975, 0.995])
def test_t_quantile_matches_quadrature_oracle(df, p):
    assert t_quantile(p, df) == pytest.approx(t_quantile_quadrature(p, df), abs=1e-6)


# -- evaluate_dataset ----------------------------------------------------------


def write_dataset(tmp_path, name, per_image_polys, dims=(16, 16)):
    manifest = DatasetManifest()
    anns = []
    ann_id = 1
    for image_id, polys in enumerate(per_image_polys, start=1):
        manifest.entries.append(
            ManifestEntry(image_id, f"img{image_id}.png", dims[0], dims[1], split="test")
        )
        for poly in polys:
            anns.append(polygon_to_annotation(poly, image_id, ann_id))
            ann_id += 1
    path = tmp_path / name
    export_coco(manifest, anns, path, check_files=False)
    return path


def test_identical_files_score_one(tmp_path):
    polys = [[square(1, 1, 4)], [square(2, 3, 5)], [square(0, 0, 3)]]
    gt = write_dataset(tmp_path, "gt.json", polys)
    pred = write_dataset(tmp_path, "pred.json", polys)
    report = evaluate_dataset(pred, gt)
    assert report.mean == 1.0 and report.margin == 0.0 and report.n == 3


def test_empty_predictions_score_zero(tmp_path):
    gt = write_dataset(tmp_path, "gt.json", [[square(1, 1, 4)], [square(2, 3, 5)]])
    pred = write_dataset(tmp_path, "pred.json", [[], []])
    report = evaluate_dataset(pred, gt)
    assert report.mean == 0.0


def test_three_image_fixture_statistics(tmp_path):
    # engineered per-image IoUs: 1.0, 0.5, 0.0
    gt = write_dataset(
        tmp_path,
        "gt.json",
        [[square(0, 0, 4)], [square(0, 0, 4)], [square(0, 0, 4)]],
    )
    pred = write_dataset(
        tmp_path,
        "pred.json",
        [[square(0, 0, 4)], [square(0, 2, 4)], [square(8, 8, 4)]],
    )
    report = evaluate_dataset(pred, gt)
    scores = [s for _, s in report.per_image]
    assert scores == pytest.approx([1.0, 1 / 3, 0.0])
    # shift square(0,2,4) overlaps 8 of 24 -> 1/3, so build exact 0.5 case
    gt2 = write_dataset(tmp_path, "gt2.json", [[square(0, 0, 4)], [square(0, 0, 2)], [square(0, 0, 4)]])
    pred2 = write_dataset(
        tmp_path,
        "pred2.json",
        [[square(0, 0, 4)], [square(0, 0, 2), square(4, 4, 2)], [square(8, 8, 4)]],
    )
    report2 = evaluate_dataset(pred2, gt2)
    scores2 = [s for _, s in report2.per_image]
    assert scores2 == pytest.approx([1.0, 0.5, 0.0])
    assert report2.mean == pytest.approx(0.5)
    assert report2.margin == pytest.approx(4.3027 * 0.5 / math.sqrt(3), abs=1e-3)


def test_prediction_for_unknown_image_rejected(tmp_path):
    gt = write_dataset(tmp_path, "gt.json", [[square(0, 0, 4)]])
    pred = write_dataset(tmp_path, "pred.json", [[square(0, 0, 4)], [square(0, 0, 4)]])
    with pytest.raises(ImageSetMismatch):
        evaluate_dataset(pred, gt)


def test_single_image_reports_zero_margin(tmp_path):
    gt = write_dataset(tmp_path, "gt.json", [[square(0, 0, 4)]])
    pred = write_dataset(tmp_path, "pred.json", [[square(0, 0, 4)]])
    report = evaluate_dataset(pred, gt)
    assert report.n == 1 and report.mean == 1.0 and report.margin == 0.0


def test_order_independence(tmp_path):
    polys = [[square(0, 0, 4), square(6, 6, 3)], [square(2, 2, 5)]]
    gt = write_dataset(tmp_path, "gt.json", polys)
    reversed_polys = [[square(6, 6, 3), square(0, 0, 4)], [square(2, 2, 5)]]
    pred = write_dataset(tmp_path, "pred.json", reversed_polys)
    assert evaluate_dataset(pred, gt).mean == 1.0


def test_report_format_mean_plus_minus_margin(tmp_path):
    gt = write_dataset(tmp_path, "gt.json", [[square(0, 0, 4)], [square(0, 0, 4)]])
    pred = write_dataset(tmp_path, "pred.json", [[square(0, 0, 4)], [square(0, 2, 4)]])
    report = evaluate_dataset(pred, gt)
    assert "±" in report.format_summary()
    assert f"{report.mean:.4f}" in format_report(report)
