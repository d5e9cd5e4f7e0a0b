"""Mask R-CNN construction from a TrainConfig.

The network is torchvision's implementation; this module only maps the
config fields onto its constructor arguments. bbox_std_dev holds the
(center, size) regression target standard deviations, which torchvision
expresses as their reciprocals in bbox_reg_weights.
"""

from __future__ import annotations

import torch
from torchvision.models.detection import MaskRCNN
from torchvision.models.detection.anchor_utils import AnchorGenerator
from torchvision.models.detection.backbone_utils import resnet_fpn_backbone

from .config import TrainConfig

NUM_CLASSES = 2  # background + lesion


def build_model(config: TrainConfig) -> MaskRCNN:
    backbone = resnet_fpn_backbone(
        backbone_name=config.backbone,
        weights="DEFAULT" if config.pretrained_backbone else None,
        trainable_layers=5,
    )
    backbone.out_channels = config.pyramid_size
    anchors = AnchorGenerator(
        sizes=tuple((float(s),) for s in config.anchor_scales),
        aspect_ratios=(tuple(config.anchor_ratios),) * len(config.anchor_scales),
    )
    sd_center, sd_size = config.bbox_std_dev
    model = MaskRCNN(
        backbone,
        num_classes=NUM_CLASSES,
        min_size=config.image_size,
        max_size=config.image_size,
        rpn_anchor_generator=anchors,
        box_positive_fraction=config.roi_positive_ratio,
        box_batch_size_per_image=config.train_rois_per_image,
        box_detections_per_img=config.max_gt_instances,
        bbox_reg_weights=(
            1.0 / sd_center,
            1.0 / sd_center,
            1.0 / sd_size,
            1.0 / sd_size,
        ),
    )
    return model


def save_checkpoint(model: MaskRCNN, config: TrainConfig, path) -> None:
    torch.save({"state_dict": model.state_dict(), "config": config.to_dict()}, path)


def load_checkpoint(path) -> tuple[MaskRCNN, TrainConfig]:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    config = TrainConfig.from_dict(payload["config"])
    model = build_model(config)
    model.load_state_dict(payload["state_dict"])
    return model, config
