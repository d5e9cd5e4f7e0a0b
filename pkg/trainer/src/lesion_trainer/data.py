"""Dataset bridging COCO annotation files to torchvision training targets.

Images and polygons come in through the annotation package's importer and
rasterizer; everything is resized to the configured square input size with
boxes and masks scaled to match.
"""

from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np
import torch
from torch.utils.data import Dataset

from ctxray.dataset import import_coco, rasterize_polygon
from ctxray.errors import SchemaError
from ctxray.pipeline import read_png_gray

from .config import TrainConfig


def _segmentation_mask(ann, width: int, height: int) -> np.ndarray:
    mask = np.zeros((height, width), dtype=bool)
    for seg in ann.segmentation:
        poly = list(zip(seg[0::2], seg[1::2]))
        mask |= rasterize_polygon(poly, (width, height))
    return mask


class CocoLesionDataset(Dataset):
    """(image tensor, target dict) pairs for torchvision's Mask R-CNN."""

    def __init__(self, coco_path, config: TrainConfig):
        self.base = Path(coco_path).parent
        self.size = config.image_size
        self.manifest, annotations = import_coco(coco_path)
        if not self.manifest.entries:
            raise SchemaError(f"{coco_path} contains no images")
        self.by_image: dict[int, list] = {}
        for a in annotations:
            self.by_image.setdefault(a.image_id, []).append(a)

    def __len__(self) -> int:
        return len(self.manifest.entries)

    def __getitem__(self, index: int):
        entry = self.manifest.entries[index]
        gray = read_png_gray(self.base / entry.file_name)
        h, w = gray.shape[:2]
        resized = cv2.resize(gray, (self.size, self.size), interpolation=cv2.INTER_LINEAR)
        image = torch.from_numpy(
            np.repeat(resized[None, :, :], 3, axis=0).astype(np.float32) / 255.0
        )

        sx, sy = self.size / w, self.size / h
        boxes, masks = [], []
        for ann in self.by_image.get(entry.image_id, []):
            x, y, bw, bh = ann.bbox
            box = [x * sx, y * sy, (x + bw) * sx, (y + bh) * sy]
            if box[2] - box[0] < 1.0 or box[3] - box[1] < 1.0:
                continue
            mask = _segmentation_mask(ann, w, h).astype(np.uint8)
            mask = cv2.resize(mask, (self.size, self.size), interpolation=cv2.INTER_NEAREST)
            if not mask.any():
                continue
            boxes.append(box)
            masks.append(mask.astype(bool))
        if boxes:
            target = {
                "boxes": torch.tensor(boxes, dtype=torch.float32),
                "labels": torch.ones(len(boxes), dtype=torch.int64),
                "masks": torch.from_numpy(np.stack(masks)),
            }
        else:
            target = {
                "boxes": torch.zeros((0, 4), dtype=torch.float32),
                "labels": torch.zeros((0,), dtype=torch.int64),
                "masks": torch.zeros((0, self.size, self.size), dtype=torch.bool),
            }
        target["image_id"] = torch.tensor(entry.image_id)
        return image, target


def collate(batch):
    return tuple(zip(*batch))
