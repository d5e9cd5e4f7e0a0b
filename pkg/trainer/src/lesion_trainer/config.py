"""Training configuration.

The defaults pin the full-scale recipe (30 epochs of 200 steps at
1024x1024 with a ResNet-101 FPN backbone); smoke runs override them and
every override is logged so a run's effective config is always visible.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path

log = logging.getLogger("trainer")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    steps_per_epoch: int = 200
    validation_steps: int = 50
    batch_size: int = 2
    backbone: str = "resnet101"
    backbone_strides: tuple[int, ...] = (4, 8, 16, 32, 64)
    pyramid_size: int = 256
    learning_rate: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 0.0001
    gradient_clip_norm: float = 5.0
    image_size: int = 1024
    image_channels: int = 3
    mask_size: int = 28
    anchor_scales: tuple[int, ...] = (32, 64, 128, 256, 512)
    anchor_ratios: tuple[float, ...] = (0.5, 1.0, 2.0)
    anchor_stride: int = 1
    roi_positive_ratio: float = 0.33
    bbox_std_dev: tuple[float, float] = (0.1, 0.2)
    train_rois_per_image: int = 200
    max_gt_instances: int = 15
    pretrained_backbone: bool = False
    score_threshold: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.steps_per_epoch < 1 or self.batch_size < 1:
            raise ValueError("epochs, steps_per_epoch and batch_size must be >= 1")
        if self.validation_steps < 0:
            raise ValueError("validation_steps must be >= 0")
        if self.image_size < 32 or self.image_channels != 3:
            raise ValueError("image_size must be >= 32 with 3 channels")
        if len(self.anchor_scales) != len(self.backbone_strides):
            raise ValueError("one anchor scale per pyramid level is required")
        if not 0.0 < self.roi_positive_ratio < 1.0:
            raise ValueError("roi_positive_ratio must be in (0, 1)")
        if not 0.0 <= self.score_threshold <= 1.0:
            raise ValueError("score_threshold must be in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        coerced = {}
        for f in fields(cls):
            if f.name not in values:
                continue
            v = values[f.name]
            coerced[f.name] = tuple(v) if isinstance(f.default, tuple) else v
        cfg = cls(**coerced)
        defaults = cls()
        for f in fields(cls):
            got = getattr(cfg, f.name)
            if got != getattr(defaults, f.name):
                log.info("config override: %s = %r", f.name, got)
        return cfg

    def save(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path) -> "TrainConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
