"""Mask R-CNN training harness for lesion instance-segmentation datasets."""

from .config import TrainConfig
from .data import CocoLesionDataset
from .model import build_model, load_checkpoint, save_checkpoint
from .predict import predict
from .train import train

__all__ = [
    "TrainConfig",
    "CocoLesionDataset",
    "build_model",
    "load_checkpoint",
    "save_checkpoint",
    "predict",
    "train",
]

__version__ = "0.1.0"
