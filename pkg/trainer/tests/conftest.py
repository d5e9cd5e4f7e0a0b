import numpy as np
import pytest

from ctxray.dataset import (
    DatasetManifest,
    ManifestEntry,
    export_coco,
    polygon_to_annotation,
    write_manifest_csv,
)
from ctxray.pipeline import write_png

SIZE = 64


def lesion_image(rng, rects):
    img = (rng.random((SIZE, SIZE)) * 40).astype(np.uint8)
    for x, y, w, h in rects:
        img[y : y + h, x : x + w] = 200
    return img


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory):
    """8 images with bright rectangular lesions plus COCO labels and a
    manifest CSV, written once per session."""
    rng = np.random.default_rng(7)
    d = tmp_path_factory.mktemp("toy")
    manifest = DatasetManifest(seed=7, protocol="fixture")
    annotations = []
    ann_id = 1
    for image_id in range(1, 9):
        rects = []
        for _ in range(int(rng.integers(1, 3))):
            w, h = (int(v) for v in rng.integers(10, 22, size=2))
            x = int(rng.integers(2, SIZE - w - 2))
            y = int(rng.integers(2, SIZE - h - 2))
            rects.append((x, y, w, h))
        name = f"img{image_id}.png"
        write_png(d / name, lesion_image(rng, rects))
        manifest.entries.append(ManifestEntry(image_id, name, SIZE, SIZE))
        for x, y, w, h in rects:
            poly = [(x, y), (x + w, y), (x + w, y + h), (x, y + h)]
            annotations.append(polygon_to_annotation(poly, image_id, ann_id))
            ann_id += 1
    export_coco(manifest, annotations, d / "labels.json")
    write_manifest_csv(manifest, d / "manifest.csv")
    return d
