"""End-to-end synthesis: CT + mask volumes to image, mask and labels.

Holds the resolved run configuration (file + flag layers merged by the
CLI) and the `synthesize` composition used by both the CLI and tests.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, fields
from pathlib import Path

import cv2
import numpy as np

from . import dataset as ds
from .errors import ConfigError, IoFailure
from .labeling import LabelingConfig, build_annotations
from .projection import (
    DEFAULT_WINDOW,
    WindowSpec,
    normalize_to_8bit,
    project_coronal,
    project_mask,
    resample_isotropic,
)
from .volume_io import pair_mask, read_nifti

log = logging.getLogger("ctxray")


@dataclass
class PipelineConfig:
    hu_min: float = DEFAULT_WINDOW[0]
    hu_max: float = DEFAULT_WINDOW[1]
    no_window: bool = False
    mask_min_voxels: int = 1
    connectivity: int = 8
    min_area: int = 16
    max_instances: int = 15
    simplify_eps: float = 1.0
    seed: int = 0
    flip_x: bool | None = None  # None: derive from volume orientation
    flip_z: bool | None = None
    resample: bool = True

    def __post_init__(self):
        if not self.no_window and not self.hu_min < self.hu_max:
            raise ConfigError(f"hu_min {self.hu_min} must be < hu_max {self.hu_max}")
        if self.connectivity not in (4, 8):
            raise ConfigError(f"connectivity must be 4 or 8, got {self.connectivity}")
        if self.mask_min_voxels < 1:
            raise ConfigError("mask_min_voxels must be >= 1")
        if self.min_area < 0 or self.max_instances < 1 or self.simplify_eps < 0:
            raise ConfigError("min_area/max_instances/simplify_eps out of range")

    @property
    def window(self) -> WindowSpec | None:
        return None if self.no_window else WindowSpec(self.hu_min, self.hu_max)

    def labeling(self) -> LabelingConfig:
        return LabelingConfig(
            connectivity=self.connectivity,
            min_area=self.min_area,
            max_instances=self.max_instances,
            simplify_eps=self.simplify_eps,
        )


_BOOLS = {"true": True, "false": False, "1": True, "0": False}


def load_config_file(path) -> dict:
    """Flat key=value config; '#' starts a comment; unknown keys rejected."""
    known = {f.name: f for f in fields(PipelineConfig)}
    out: dict = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"cannot read config {path}: {e}") from e
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        out[key] = _coerce(key, value, known[key].type)
    return out


def _coerce(key: str, value: str, ftype) -> object:
    t = str(ftype)
    try:
        if "bool" in t:
            if value.lower() not in _BOOLS:
                raise ValueError(value)
            return _BOOLS[value.lower()]
        if "int" in t:
            return int(value)
        return float(value)
    except ValueError as e:
        raise ConfigError(f"config key {key!r}: cannot parse {value!r}") from e


def write_png(path, pixels: np.ndarray) -> None:
    if not cv2.imwrite(str(path), pixels):
        raise IoFailure(f"cannot write {path}")


def read_png_gray(path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise IoFailure(f"cannot read image {path}")
    if img.ndim == 3:
        img = cv2.cvtColor(img, cv2.COLOR_BGR2GRAY)
    return img


def synthesize_case(ct_path, mask_path, config: PipelineConfig):
    """One CT/mask pair -> (Image8, binary mask array, instance list).

    The lesion mask is projected, moved to display space and resampled on
    the same isotropic grid as the image so labels stay aligned.
    """
    ct = read_nifti(ct_path)
    mask = read_nifti(mask_path)
    pair_mask(ct, mask)

    proj = project_coronal(ct, config.window, config.flip_x, config.flip_z)
    img = normalize_to_8bit(proj)
    mask2d = project_mask(mask, config.mask_min_voxels, config.flip_x, config.flip_z)
    mask_img = np.ascontiguousarray(mask2d.T)  # display space: rows = z
    if config.resample:
        img = resample_isotropic(img, proj.pixel_spacing)
        mask_img = resample_isotropic(mask_img, proj.pixel_spacing)
    instances = build_annotations(mask_img, config.labeling())
    return img, mask_img, instances


def synthesize(pairs, out_dir, config: PipelineConfig):
    """Run synthesize_case over (ct, mask) path pairs and materialize
    PNGs plus one COCO file and a manifest CSV in out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = ds.DatasetManifest(seed=config.seed, protocol="synthesized")
    annotations: list[ds.CocoAnnotation] = []
    ann_id = 1
    for image_id, (ct_path, mask_path) in enumerate(pairs, start=1):
        stem = Path(ct_path).name.split(".")[0]
        img, mask_img, instances = synthesize_case(ct_path, mask_path, config)
        img_name = f"{stem}.png"
        write_png(out_dir / img_name, img.pixels)
        write_png(out_dir / f"{stem}_mask.png", mask_img.astype(np.uint8) * 255)
        w, h = img.dims
        manifest.entries.append(
            ds.ManifestEntry(image_id, img_name, w, h, provenance="projected")
        )
        for inst in instances:
            annotations.append(ds.instance_to_annotation(inst, image_id, ann_id))
            ann_id += 1
        log.info("synthesized %s: %d instances", img_name, len(instances))
    ds.export_coco(manifest, annotations, out_dir / "labels.json")
    ds.write_manifest_csv(manifest, out_dir / "manifest.csv")
    return manifest, annotations
