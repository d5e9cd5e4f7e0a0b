"""Inference: checkpoint + image manifest -> COCO prediction file.

Predicted masks are thresholded at 0.5, traced into boundary polygons
with the annotation package's contour-tracing convention, and written
back through its exporter so the file validates against the same schema
the evaluator consumes.
"""

from __future__ import annotations

import logging
from pathlib import Path

import cv2
import numpy as np
import torch

from ctxray.dataset import (
    DatasetManifest,
    ManifestEntry,
    export_coco,
    instance_to_annotation,
    read_manifest_csv,
)
from ctxray.labeling import LabelingConfig, build_annotations
from ctxray.pipeline import read_png_gray

from .model import load_checkpoint

log = logging.getLogger("trainer")


def _detections_to_instances(pred, score_threshold, out_w, out_h):
    """Binary masks above threshold -> polygon instances at image scale."""
    instances = []
    scores = pred["scores"].numpy()
    masks = pred["masks"].numpy()  # [n, 1, net, net] soft masks
    for i in np.flatnonzero(scores >= score_threshold):
        soft = masks[i, 0]
        binary = cv2.resize(soft, (out_w, out_h), interpolation=cv2.INTER_LINEAR) >= 0.5
        if not binary.any():
            continue
        # one detection may still fragment after thresholding; keep the
        # largest piece so each detection maps to one polygon
        found = build_annotations(binary, LabelingConfig(min_area=1, max_instances=1))
        instances.extend(found)
    return instances


def predict(checkpoint, manifest_csv, out_path, score_threshold=None) -> Path:
    model, config = load_checkpoint(checkpoint)
    model.eval()
    threshold = config.score_threshold if score_threshold is None else score_threshold
    manifest = read_manifest_csv(manifest_csv)
    base = Path(manifest_csv).parent

    out_manifest = DatasetManifest(seed=config.seed, protocol="predictions")
    annotations = []
    ann_id = 1
    for entry in manifest.entries:
        gray = read_png_gray(base / entry.file_name)
        h, w = gray.shape[:2]
        resized = cv2.resize(
            gray, (config.image_size, config.image_size), interpolation=cv2.INTER_LINEAR
        )
        image = torch.from_numpy(
            np.repeat(resized[None, :, :], 3, axis=0).astype(np.float32) / 255.0
        )
        with torch.no_grad():
            pred = model([image])[0]
        instances = _detections_to_instances(pred, threshold, w, h)
        out_manifest.entries.append(
            ManifestEntry(entry.image_id, entry.file_name, w, h, entry.provenance, entry.split)
        )
        for inst in instances:
            annotations.append(instance_to_annotation(inst, entry.image_id, ann_id))
            ann_id += 1
        log.info("%s: %d detection(s)", entry.file_name, len(instances))
    export_coco(out_manifest, annotations, out_path, check_files=False)
    return Path(out_path)
