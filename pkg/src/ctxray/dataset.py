"""COCO-style dataset assembly and serialization.

Handles three concerns: byte-deterministic COCO JSON export/import for a
single "lesion" category, polygon rasterization (the inverse of the
labeling module's polygon extraction, used by evaluation and tests), and
the seeded assembly of the two training protocols plus the held-out test
split.

Deterministic output rules: JSON keys are emitted in a fixed order and
floats with exactly six decimal places, so identical inputs always
produce identical bytes.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DegeneratePolygon,
    InsufficientPool,
    InvariantViolation,
    IoFailure,
    SchemaError,
)
from .labeling import LesionInstance
from .rng import substream

CATEGORY_LESION = {"id": 1, "name": "lesion"}

PROVENANCES = ("real", "projected")
SPLITS = ("train", "test")


@dataclass
class ManifestEntry:
    image_id: int
    file_name: str
    width: int
    height: int
    provenance: str = "real"
    split: str = "train"


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry] = field(default_factory=list)
    seed: int = 0
    protocol: str = "custom"

    def counts(self) -> dict[tuple[str, str], int]:
        out: dict[tuple[str, str], int] = {}
        for e in self.entries:
            key = (e.split, e.provenance)
            out[key] = out.get(key, 0) + 1
        return out

    def validate(self, base_dir: Path | None = None) -> None:
        ids = [e.image_id for e in self.entries]
        if ids != list(range(1, len(ids) + 1)):
            raise InvariantViolation("image ids must be contiguous from 1")
        for e in self.entries:
            if e.provenance not in PROVENANCES:
                raise InvariantViolation(f"bad provenance {e.provenance!r} (image {e.image_id})")
            if e.split not in SPLITS:
                raise InvariantViolation(f"bad split {e.split!r} (image {e.image_id})")
            if base_dir is not None and not (base_dir / e.file_name).exists():
                raise InvariantViolation(f"missing file {e.file_name} (image {e.image_id})")


@dataclass
class CocoAnnotation:
    annotation_id: int
    image_id: int
    segmentation: list[list[float]]
    bbox: tuple[float, float, float, float]
    area: float
    category_id: int = 1
    iscrowd: int = 0

    def validate(self) -> None:
        for seg in self.segmentation:
            if len(seg) < 6 or len(seg) % 2 != 0:
                raise InvariantViolation(
                    f"annotation {self.annotation_id}: segmentation length {len(seg)}"
                )
        if self.area <= 0:
            raise InvariantViolation(f"annotation {self.annotation_id}: area {self.area}")


def instance_to_annotation(
    inst: LesionInstance, image_id: int, annotation_id: int
) -> CocoAnnotation:
    """Convert a traced lesion instance into a COCO annotation row."""
    if inst.polygon is None or len(inst.polygon) < 3:
        raise DegeneratePolygon(f"instance {inst.component_id} has no usable polygon")
    xs = [p[0] for p in inst.polygon]
    ys = [p[1] for p in inst.polygon]
    flat = [float(c) for xy in inst.polygon for c in xy]
    return CocoAnnotation(
        annotation_id=annotation_id,
        image_id=image_id,
        segmentation=[flat],
        bbox=(min(xs), min(ys), max(xs) - min(xs), max(ys) - min(ys)),
        area=float(inst.pixel_count),
    )


def polygon_to_annotation(polygon, image_id: int, annotation_id: int) -> CocoAnnotation:
    """Annotation row from a bare polygon; area via the shoelace formula."""
    if len(polygon) < 3:
        raise DegeneratePolygon(f"polygon needs >= 3 vertices, got {len(polygon)}")
    xs = [p[0] for p in polygon]
    ys = [p[1] for p in polygon]
    area = 0.0
    n = len(polygon)
    for i in range(n):
        x1, y1 = polygon[i]
        x2, y2 = polygon[(i + 1) % n]
        area += x1 * y2 - x2 * y1
    return CocoAnnotation(
        annotation_id=annotation_id,
        image_id=image_id,
        segmentation=[[float(c) for xy in polygon for c in xy]],
        bbox=(min(xs), min(ys), max(xs) - min(xs), max(ys) - min(ys)),
        area=abs(area) / 2.0,
    )


# -- deterministic JSON ------------------------------------------------------


def _jdump(o) -> str:
    if isinstance(o, bool):
        return "true" if o else "false"
    if isinstance(o, (int, np.integer)):
        return str(int(o))
    if isinstance(o, (float, np.floating)):
        return f"{float(o):.6f}"
    if isinstance(o, str):
        return json.dumps(o)
    if isinstance(o, (list, tuple)):
        return "[" + ",".join(_jdump(v) for v in o) + "]"
    if isinstance(o, dict):
        return "{" + ",".join(f"{json.dumps(k)}:{_jdump(v)}" for k, v in o.items()) + "}"
    raise TypeError(f"cannot serialize {type(o)}")


def export_coco(
    manifest: DatasetManifest,
    annotations: list[CocoAnnotation],
    out_path,
    check_files: bool = True,
) -> None:
    """Write the dataset as one deterministic COCO JSON document."""
    out_path = Path(out_path)
    manifest.validate(base_dir=out_path.parent if check_files else None)
    for a in annotations:
        a.validate()
    doc = {
        "info": {"seed": int(manifest.seed), "protocol": manifest.protocol},
        "images": [
            {
                "id": e.image_id,
                "file_name": e.file_name,
                "width": int(e.width),
                "height": int(e.height),
                "provenance": e.provenance,
                "split": e.split,
            }
            for e in manifest.entries
        ],
        "annotations": [
            {
                "id": a.annotation_id,
                "image_id": a.image_id,
                "category_id": a.category_id,
                "segmentation": [[float(c) for c in seg] for seg in a.segmentation],
                "bbox": [float(v) for v in a.bbox],
                "area": float(a.area),
                "iscrowd": a.iscrowd,
            }
            for a in annotations
        ],
        "categories": [CATEGORY_LESION],
    }
    try:
        out_path.write_text(_jdump(doc) + "\n", encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"cannot write {out_path}: {e}") from e


def _require(d: dict, key: str, ctx: str):
    if key not in d:
        raise SchemaError(f"{ctx}: missing key {key!r}")
    return d[key]


def import_coco(path) -> tuple[DatasetManifest, list[CocoAnnotation]]:
    """Read a COCO document written by export_coco (extra keys tolerated)."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: top level must be an object")
    images = _require(doc, "images", str(path))
    anns = _require(doc, "annotations", str(path))
    _require(doc, "categories", str(path))

    info = doc.get("info", {})
    manifest = DatasetManifest(
        seed=int(info.get("seed", 0)),
        protocol=str(info.get("protocol", "custom")),
    )
    for img in images:
        manifest.entries.append(
            ManifestEntry(
                image_id=int(_require(img, "id", "image")),
                file_name=str(_require(img, "file_name", "image")),
                width=int(_require(img, "width", "image")),
                height=int(_require(img, "height", "image")),
                provenance=str(img.get("provenance", "real")),
                split=str(img.get("split", "train")),
            )
        )
    out_anns = []
    for a in anns:
        ann_id = int(_require(a, "id", "annotation"))
        seg = _require(a, "segmentation", f"annotation {ann_id}")
        if not isinstance(seg, list) or not all(isinstance(s, list) for s in seg):
            raise SchemaError(f"annotation {ann_id}: segmentation must be a list of lists")
        for s in seg:
            if len(s) < 6 or len(s) % 2 != 0:
                raise SchemaError(f"annotation {ann_id}: bad segmentation length {len(s)}")
        bbox = _require(a, "bbox", f"annotation {ann_id}")
        if len(bbox) != 4:
            raise SchemaError(f"annotation {ann_id}: bbox must have 4 entries")
        out_anns.append(
            CocoAnnotation(
                annotation_id=ann_id,
                image_id=int(_require(a, "image_id", f"annotation {ann_id}")),
                category_id=int(a.get("category_id", 1)),
                segmentation=[[float(c) for c in s] for s in seg],
                bbox=tuple(float(v) for v in bbox),
                area=float(_require(a, "area", f"annotation {ann_id}")),
                iscrowd=int(a.get("iscrowd", 0)),
            )
        )
    return manifest, out_anns


# -- rasterization -----------------------------------------------------------


def rasterize_polygon(polygon, dims: tuple[int, int]) -> np.ndarray:
    """Scan-convert a polygon to a bool mask of shape (H, W).

    Even-odd rule at pixel centers; a center exactly on an edge resolves
    by the top-left rule (left/top edges inside, right/bottom outside),
    implemented through half-open y spans and >= x-crossing counts.
    """
    pts = np.asarray(polygon, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 2:
        raise DegeneratePolygon(f"polygon needs >= 3 vertices, got shape {pts.shape}")
    w, h = dims
    xc = np.arange(w) + 0.5
    yc = np.arange(h) + 0.5
    parity = np.zeros((h, w), dtype=np.int64)
    n = pts.shape[0]
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        if y1 == y2:
            continue
        ymin, ymax = (y1, y2) if y1 < y2 else (y2, y1)
        rows = (yc >= ymin) & (yc < ymax)
        if not rows.any():
            continue
        t = (yc[rows] - y1) / (y2 - y1)
        xi = x1 + t * (x2 - x1)
        parity[rows] += xc[None, :] >= xi[:, None]
    return parity % 2 == 1


def union_mask(annotations, dims: tuple[int, int]) -> np.ndarray:
    """OR of all rasterized segmentation polygons; empty list -> empty mask."""
    w, h = dims
    out = np.zeros((h, w), dtype=bool)
    for a in annotations:
        for seg in a.segmentation:
            poly = list(zip(seg[0::2], seg[1::2]))
            out |= rasterize_polygon(poly, dims)
    return out


# -- assembly ----------------------------------------------------------------

DATASET1_XRAYS = 60
DATASET2_XRAYS = 10
DATASET2_PROJECTIONS = 50


def _png_size(path) -> tuple[int, int]:
    try:
        with open(path, "rb") as f:
            head = f.read(24)
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e
    if head[:8] != b"\x89PNG\r\n\x1a\n" or head[12:16] != b"IHDR":
        raise IoFailure(f"{path}: not a PNG file")
    w, h = struct.unpack(">II", head[16:24])
    return int(w), int(h)


def _draw(seed: int, tag: str, pool: list, n: int, what: str) -> list:
    if len(pool) < n:
        raise InsufficientPool(n, len(pool), what)
    idx = substream(seed, tag).permutation(len(pool))[:n]
    return [pool[i] for i in idx]


def assemble_dataset(
    xray_pool,
    projection_pool,
    protocol: str,
    seed: int,
    custom_counts: tuple[int, int] | None = None,
) -> DatasetManifest:
    """Build a train/test manifest per the configured protocol.

    dataset1: 60 X-rays drawn without replacement for training; every
    X-ray not drawn becomes test. dataset2: 10 of the same seed's
    dataset1 training X-rays plus 50 drawn projections for training;
    test is identical to dataset1's. All draws come from named PCG64
    substreams of `seed`, so two runs with equal inputs are identical.
    """
    xray_pool = [str(p) for p in xray_pool]
    projection_pool = [str(p) for p in projection_pool]
    d1_train = _draw(seed, "dataset1", xray_pool, DATASET1_XRAYS, "X-rays")
    d1_set = set(d1_train)
    test = [p for p in xray_pool if p not in d1_set]

    if protocol == "dataset1":
        train = [(p, "real") for p in d1_train]
    elif protocol == "dataset2":
        sub = _draw(seed, "dataset2-xrays", d1_train, DATASET2_XRAYS, "dataset1 X-rays")
        proj = _draw(
            seed, "dataset2-projections", projection_pool, DATASET2_PROJECTIONS, "projections"
        )
        train = [(p, "real") for p in sub] + [(p, "projected") for p in proj]
    elif protocol == "custom":
        if custom_counts is None:
            raise InvariantViolation("custom protocol requires custom_counts")
        n_x, n_p = custom_counts
        xs = _draw(seed, "custom-xrays", xray_pool, n_x, "X-rays")
        ps = _draw(seed, "custom-projections", projection_pool, n_p, "projections")
        xset = set(xs)
        test = [p for p in xray_pool if p not in xset]
        train = [(p, "real") for p in xs] + [(p, "projected") for p in ps]
    else:
        raise InvariantViolation(f"unknown protocol {protocol!r}")

    manifest = DatasetManifest(seed=seed, protocol=protocol)
    next_id = 1
    for path, prov in train:
        w, h = _png_size(path)
        manifest.entries.append(
            ManifestEntry(next_id, path, w, h, provenance=prov, split="train")
        )
        next_id += 1
    for path in test:
        w, h = _png_size(path)
        manifest.entries.append(
            ManifestEntry(next_id, path, w, h, provenance="real", split="test")
        )
        next_id += 1
    return manifest


def write_manifest_csv(manifest: DatasetManifest, path) -> None:
    """Audit sidecar: one row per image."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["image_id", "path", "provenance", "split"])
        for e in manifest.entries:
            writer.writerow([e.image_id, e.file_name, e.provenance, e.split])


def read_manifest_csv(path) -> DatasetManifest:
    """Inverse of write_manifest_csv (sizes are re-read from the PNGs)."""
    manifest = DatasetManifest()
    base = Path(path).parent
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        for row in reader:
            p = row["path"]
            full = p if Path(p).is_absolute() else str(base / p)
            w, h = _png_size(full)
            manifest.entries.append(
                ManifestEntry(int(row["image_id"]), p, w, h, row["provenance"], row["split"])
            )
    return manifest
