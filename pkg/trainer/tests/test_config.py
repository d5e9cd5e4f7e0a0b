import logging

import pytest

from lesion_trainer.config import TrainConfig

FULL_SCALE_DEFAULTS = {
    "epochs": 30,
    "steps_per_epoch": 200,
    "validation_steps": 50,
    "batch_size": 2,
    "backbone": "resnet101",
    "backbone_strides": (4, 8, 16, 32, 64),
    "pyramid_size": 256,
    "learning_rate": 0.001,
    "momentum": 0.9,
    "weight_decay": 0.0001,
    "gradient_clip_norm": 5.0,
    "image_size": 1024,
    "image_channels": 3,
    "mask_size": 28,
    "anchor_scales": (32, 64, 128, 256, 512),
    "anchor_ratios": (0.5, 1.0, 2.0),
    "anchor_stride": 1,
    "roi_positive_ratio": 0.33,
    "bbox_std_dev": (0.1, 0.2),
    "train_rois_per_image": 200,
    "max_gt_instances": 15,
    "pretrained_backbone": False,
    "score_threshold": 0.5,
    "seed": 0,
}


def test_defaults_field_for_field():
    assert TrainConfig().to_dict() == FULL_SCALE_DEFAULTS


def test_round_trip(tmp_path):
    cfg = TrainConfig(epochs=2, steps_per_epoch=5, image_size=64, seed=9)
    cfg.save(tmp_path / "cfg.json")
    assert TrainConfig.load(tmp_path / "cfg.json") == cfg


def test_zero_epochs_rejected():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)


def test_unknown_key_rejected():
    with pytest.raises(ValueError, match="unknown config"):
        TrainConfig.from_dict({"epocks": 3})


def test_mismatched_anchor_levels_rejected():
    with pytest.raises(ValueError):
        TrainConfig(anchor_scales=(32, 64))


def test_overrides_are_logged(caplog):
    with caplog.at_level(logging.INFO, logger="trainer"):
        TrainConfig.from_dict({"epochs": 2, "image_size": 64})
    messages = " ".join(r.getMessage() for r in caplog.records)
    assert "epochs = 2" in messages
    assert "image_size = 64" in messages


def test_defaults_log_no_overrides(caplog):
    with caplog.at_level(logging.INFO, logger="trainer"):
        TrainConfig.from_dict({})
    assert not [r for r in caplog.records if "override" in r.getMessage()]
