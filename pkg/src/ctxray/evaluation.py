"""Segmentation evaluation: per-image IoU plus a one-sample t-interval.

Scores are semantic: all instances of an image are unioned into one
foreground mask per side before the overlap ratio is taken. The
aggregate is reported as mean +/- t * s / sqrt(n) at the configured
confidence, with s the (n-1)-denominator sample standard deviation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .dataset import CocoAnnotation, import_coco, union_mask
from .errors import DimensionMismatch, ImageSetMismatch, InsufficientSamples


@dataclass
class IoUReport:
    per_image: list[tuple[int, float]] = field(default_factory=list)
    mean: float = 0.0
    sample_std: float = 0.0
    margin: float = 0.0
    confidence: float = 0.95

    @property
    def n(self) -> int:
        return len(self.per_image)

    def format_summary(self) -> str:
        """One-line "mean +/- margin" summary."""
        return f"{self.mean:.4f} ± {self.margin:.4f}"


def iou(a: np.ndarray, b: np.ndarray) -> float:
    """|a & b| / |a | b|. Both-empty counts as perfect agreement (1.0)."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise DimensionMismatch(f"mask shapes differ: {a.shape} vs {b.shape}")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def image_iou(
    pred: list[CocoAnnotation],
    gt: list[CocoAnnotation],
    dims: tuple[int, int],
) -> float:
    """Semantic IoU: union of predicted instances vs union of ground truth."""
    return iou(union_mask(pred, dims), union_mask(gt, dims))


def t_quantile(p: float, df: int) -> float:
    """Student-t inverse CDF (scipy's inverse incomplete-beta method)."""
    return float(stats.t.ppf(p, df))


def t_margin(scores, confidence: float = 0.95) -> tuple[float, float]:
    """Mean and half-width of the one-sample t-interval."""
    scores = list(scores)
    n = len(scores)
    if n < 2:
        raise InsufficientSamples(f"need at least 2 scores, got {n}")
    mean = float(np.mean(scores))
    s = float(np.std(scores, ddof=1))
    t = t_quantile((1.0 + confidence) / 2.0, n - 1)
    return mean, t * s / math.sqrt(n)


def evaluate_dataset(
    pred_coco,
    gt_coco,
    confidence: float = 0.95,
    empty_pair_policy: str = "score_one",
) -> IoUReport:
    """Score a prediction file against a ground-truth file.

    Every ground-truth image is scored; images with no predictions score
    against an empty mask. `empty_pair_policy` controls images where
    both sides are empty: "score_one" keeps them at IoU 1.0, "skip"
    drops them from the sample. With a single retained image the margin
    is reported as 0 (no spread estimate is possible).
    """
    if empty_pair_policy not in ("score_one", "skip"):
        raise ValueError(f"unknown empty_pair_policy {empty_pair_policy!r}")
    pred_manifest, pred_anns = import_coco(pred_coco)
    gt_manifest, gt_anns = import_coco(gt_coco)

    gt_ids = {e.image_id for e in gt_manifest.entries}
    unknown = {a.image_id for a in pred_anns} - gt_ids
    if unknown:
        raise ImageSetMismatch(f"predictions reference unknown image ids {sorted(unknown)}")

    pred_by_img: dict[int, list[CocoAnnotation]] = {}
    for a in pred_anns:
        pred_by_img.setdefault(a.image_id, []).append(a)
    gt_by_img: dict[int, list[CocoAnnotation]] = {}
    for a in gt_anns:
        gt_by_img.setdefault(a.image_id, []).append(a)

    report = IoUReport(confidence=confidence)
    for e in sorted(gt_manifest.entries, key=lambda e: e.image_id):
        p = sorted(pred_by_img.get(e.image_id, []), key=lambda a: a.annotation_id)
        g = sorted(gt_by_img.get(e.image_id, []), key=lambda a: a.annotation_id)
        if not p and not g and empty_pair_policy == "skip":
            continue
        report.per_image.append((e.image_id, image_iou(p, g, (e.width, e.height))))

    scores = [s for _, s in report.per_image]
    if not scores:
        return report
    report.mean = float(np.mean(scores))
    if len(scores) >= 2:
        report.sample_std = float(np.std(scores, ddof=1))
        if report.sample_std > 0:
            _, report.margin = t_margin(scores, confidence)
    return report


def format_report(report: IoUReport) -> str:
    lines = [
        "image_id  iou",
        *(f"{img_id:>8}  {score:.4f}" for img_id, score in report.per_image),
        f"n = {report.n}",
        f"IoU = {report.format_summary()}  ({report.confidence:.0%} t-interval)",
    ]
    return "\n".join(lines)


def report_to_dict(report: IoUReport) -> dict:
    return {
        "n": report.n,
        "mean": report.mean,
        "sample_std": report.sample_std,
        "margin": report.margin,
        "confidence": report.confidence,
        "per_image": [{"image_id": i, "iou": s} for i, s in report.per_image],
    }
