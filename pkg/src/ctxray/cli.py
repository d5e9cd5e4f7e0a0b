"""Command-line entry point.

Subcommands: project, synthesize, labelize, build-dataset, augment,
evaluate. Exit codes: 0 success, 1 domain error (error class name
printed to stderr), 2 usage error. All randomness enters through
--seed; identical inputs and seed produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import cv2
import numpy as np

from . import dataset as ds
from .augmentation import apply_augmentation, render_overlay, sample_params
from .errors import CtxrayError, IoFailure, SchemaError
from .evaluation import evaluate_dataset, format_report, report_to_dict
from .labeling import build_annotations
from .pipeline import (
    PipelineConfig,
    load_config_file,
    read_png_gray,
    synthesize,
    write_png,
)
from .projection import Image8, normalize_to_8bit, project_coronal, resample_isotropic
from .volume_io import read_nifti

log = logging.getLogger("ctxray")

_TRISTATE = {"auto": None, "on": True, "off": False}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file (flags override it)")
    p.add_argument("--hu-min", type=float, dest="hu_min")
    p.add_argument("--hu-max", type=float, dest="hu_max")
    p.add_argument("--no-window", action="store_const", const=True, dest="no_window")
    p.add_argument("--mask-min-voxels", type=int, dest="mask_min_voxels")
    p.add_argument("--connectivity", type=int, choices=(4, 8))
    p.add_argument("--min-area", type=int, dest="min_area")
    p.add_argument("--max-instances", type=int, dest="max_instances")
    p.add_argument("--simplify-eps", type=float, dest="simplify_eps")
    p.add_argument("--seed", type=int)
    p.add_argument("--flip-x", choices=_TRISTATE, default=None)
    p.add_argument("--flip-z", choices=_TRISTATE, default=None)
    p.add_argument("--no-resample", action="store_const", const=True, dest="no_resample")


def _resolve_config(args) -> PipelineConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    for key in (
        "hu_min",
        "hu_max",
        "no_window",
        "mask_min_voxels",
        "connectivity",
        "min_area",
        "max_instances",
        "simplify_eps",
        "seed",
    ):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    for key in ("flip_x", "flip_z"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = _TRISTATE[v]
    if getattr(args, "no_resample", None):
        values["resample"] = False
    cfg = PipelineConfig(**values)
    log.info("resolved config: %s", asdict(cfg))
    return cfg


def _nifti_pairs(ct_path: str, mask_path: str) -> list[tuple[Path, Path]]:
    ct, mask = Path(ct_path), Path(mask_path)
    if ct.is_dir() != mask.is_dir():
        raise IoFailure("--ct and --mask must both be files or both be directories")
    if not ct.is_dir():
        return [(ct, mask)]
    cts = sorted(p for p in ct.iterdir() if ".nii" in p.suffixes or p.name.endswith(".nii"))
    pairs = []
    for c in cts:
        m = mask / c.name
        if not m.exists():
            raise IoFailure(f"no mask volume named {c.name} in {mask}")
        pairs.append((c, m))
    if not pairs:
        raise IoFailure(f"no NIfTI volumes found in {ct}")
    return pairs


# -- subcommand implementations ----------------------------------------------


def _cmd_project(args) -> int:
    cfg = _resolve_config(args)
    vol = read_nifti(args.ct)
    proj = project_coronal(vol, cfg.window, cfg.flip_x, cfg.flip_z)
    img = normalize_to_8bit(proj)
    if cfg.resample:
        img = resample_isotropic(img, proj.pixel_spacing)
    write_png(args.out, img.pixels)
    log.info("wrote %s (%dx%d)", args.out, *img.dims)
    return 0


def _cmd_synthesize(args) -> int:
    cfg = _resolve_config(args)
    pairs = _nifti_pairs(args.ct, args.mask)
    manifest, annotations = synthesize(pairs, args.out, cfg)
    print(
        f"synthesized {len(manifest.entries)} image(s), "
        f"{len(annotations)} annotation(s) -> {args.out}"
    )
    return 0


def _cmd_labelize(args) -> int:
    cfg = _resolve_config(args)
    mask = read_png_gray(args.mask) > 0
    instances = build_annotations(mask, cfg.labeling())
    h, w = mask.shape
    name = Path(args.image).name if args.image else Path(args.mask).name
    manifest = ds.DatasetManifest(seed=cfg.seed)
    manifest.entries.append(ds.ManifestEntry(1, name, w, h, provenance="projected"))
    annotations = [
        ds.instance_to_annotation(inst, 1, i) for i, inst in enumerate(instances, 1)
    ]
    ds.export_coco(manifest, annotations, args.out, check_files=False)
    print(f"labelized {args.mask}: {len(annotations)} instance(s) -> {args.out}")
    return 0


def _glob_pngs(directory: str) -> list[str]:
    paths = sorted(str(p) for p in Path(directory).glob("*.png"))
    if not paths:
        raise IoFailure(f"no PNG files in {directory}")
    return paths


def _carry_annotations(pool_dir, manifest, annotations, next_ann_id):
    """Remap annotations from a pool's labels.json onto new image ids."""
    labels = Path(pool_dir) / "labels.json"
    if not labels.exists():
        return next_ann_id
    src_manifest, src_anns = ds.import_coco(labels)
    by_name = {Path(e.file_name).name: e.image_id for e in src_manifest.entries}
    anns_by_src: dict[int, list] = {}
    for a in src_anns:
        anns_by_src.setdefault(a.image_id, []).append(a)
    for e in manifest.entries:
        src_id = by_name.get(Path(e.file_name).name)
        if src_id is None:
            continue
        for a in sorted(anns_by_src.get(src_id, []), key=lambda a: a.annotation_id):
            annotations.append(
                ds.CocoAnnotation(
                    annotation_id=next_ann_id,
                    image_id=e.image_id,
                    segmentation=a.segmentation,
                    bbox=a.bbox,
                    area=a.area,
                )
            )
            next_ann_id += 1
    return next_ann_id


def _cmd_build_dataset(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    xrays = _glob_pngs(args.xrays)
    projections = _glob_pngs(args.projections) if args.projections else []
    manifest = ds.assemble_dataset(xrays, projections, args.protocol, args.seed)
    for e in manifest.entries:
        e.file_name = os.path.relpath(e.file_name, out_dir)
    annotations: list[ds.CocoAnnotation] = []
    next_id = _carry_annotations(args.xrays, manifest, annotations, 1)
    if args.projections:
        _carry_annotations(args.projections, manifest, annotations, next_id)
    annotations.sort(key=lambda a: (a.image_id, a.annotation_id))
    for i, a in enumerate(annotations, 1):
        a.annotation_id = i
    ds.export_coco(manifest, annotations, out_dir / "dataset.json")
    ds.write_manifest_csv(manifest, out_dir / "manifest.csv")
    counts = manifest.counts()
    print(f"{args.protocol}: {counts} -> {out_dir}")
    return 0


def _ann_polygons(anns: list[ds.CocoAnnotation]) -> list[list[tuple[float, float]]]:
    polys = []
    for a in anns:
        for seg in a.segmentation:
            polys.append(list(zip(seg[0::2], seg[1::2])))
    return polys


def _cmd_augment(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest, anns = ds.import_coco(args.coco)
    base = Path(args.coco).parent
    anns_by_img: dict[int, list] = {}
    for a in anns:
        anns_by_img.setdefault(a.image_id, []).append(a)

    if args.mode == "preview":
        if args.image_id is None:
            raise SchemaError("preview mode requires --image-id")
        entry = next((e for e in manifest.entries if e.image_id == args.image_id), None)
        if entry is None:
            raise SchemaError(f"image id {args.image_id} not in {args.coco}")
        img = Image8(read_png_gray(base / entry.file_name), entry.provenance)
        polys = _ann_polygons(anns_by_img.get(entry.image_id, []))
        params = sample_params(args.seed, entry.image_id, 0)
        aug_img, aug_polys = apply_augmentation(img, polys, params)
        left = render_overlay(img, polys)
        right = render_overlay(aug_img, aug_polys)
        panel = np.hstack([left, right])
        out = out_dir / f"preview_{entry.image_id}.png"
        write_png(out, panel)
        print(f"wrote {out}")
        return 0

    new_manifest = ds.DatasetManifest(seed=args.seed, protocol="augmented")
    new_anns: list[ds.CocoAnnotation] = []
    img_id, ann_id = 1, 1
    for entry in manifest.entries:
        pixels = read_png_gray(base / entry.file_name)
        img = Image8(pixels, entry.provenance)
        polys = _ann_polygons(anns_by_img.get(entry.image_id, []))
        for copy in range(args.copies + 1):
            if copy == 0:
                out_img, out_polys = img, polys  # original, carried through
                name = f"img{entry.image_id:05d}_orig.png"
            else:
                params = sample_params(args.seed, entry.image_id, copy)
                out_img, out_polys = apply_augmentation(img, polys, params)
                name = f"img{entry.image_id:05d}_aug{copy:02d}.png"
            write_png(out_dir / name, out_img.pixels)
            h, w = out_img.pixels.shape[:2]
            new_manifest.entries.append(
                ds.ManifestEntry(img_id, name, w, h, entry.provenance, entry.split)
            )
            for poly in out_polys:
                new_anns.append(ds.polygon_to_annotation(poly, img_id, ann_id))
                ann_id += 1
            img_id += 1
    ds.export_coco(new_manifest, new_anns, out_dir / "augmented.json")
    print(
        f"augmented {len(manifest.entries)} image(s) x{args.copies} -> "
        f"{len(new_manifest.entries)} images, {len(new_anns)} annotations"
    )
    return 0


def _write_overlays(report, gt_path, out_dir) -> None:
    from .dataset import import_coco, union_mask

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    gt_manifest, gt_anns = import_coco(gt_path)
    base = Path(gt_path).parent
    by_img: dict[int, list] = {}
    for a in gt_anns:
        by_img.setdefault(a.image_id, []).append(a)
    for e in gt_manifest.entries:
        img_file = base / e.file_name
        if img_file.exists():
            gray = read_png_gray(img_file)
            panel = np.stack([gray] * 3, -1)
        else:
            panel = np.zeros((e.height, e.width, 3), np.uint8)
        gt_mask = union_mask(by_img.get(e.image_id, []), (e.width, e.height))
        panel[gt_mask, 1] = 255
        write_png(out_dir / f"overlay_{e.image_id}.png", panel)


def _cmd_evaluate(args) -> int:
    report = evaluate_dataset(args.pred, args.gt, confidence=args.confidence)
    print(format_report(report))
    if args.out:
        from .dataset import _jdump

        Path(args.out).write_text(_jdump(report_to_dict(report)) + "\n", encoding="utf-8")
    if args.overlays:
        _write_overlays(report, args.gt, args.overlays)
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctxray",
        description="Synthetic chest X-rays with lesion annotations from CT volumes",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("project", help="project one CT volume to a PNG")
    p.add_argument("--ct", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=_cmd_project)

    p = sub.add_parser("synthesize", help="CT+mask volumes to images, masks and COCO labels")
    p.add_argument("--ct", required=True, help="NIfTI file or directory")
    p.add_argument("--mask", required=True, help="NIfTI file or directory")
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=_cmd_synthesize)

    p = sub.add_parser("labelize", help="binary mask PNG to COCO instance labels")
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--image", help="paired image PNG (used for file_name)")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_labelize)

    p = sub.add_parser("build-dataset", help="assemble a training protocol")
    p.add_argument("--protocol", required=True, choices=("dataset1", "dataset2"))
    p.add_argument("--xrays", required=True, help="directory of X-ray PNGs")
    p.add_argument("--projections", help="directory of projection PNGs")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_build_dataset)

    p = sub.add_parser("augment", help="offline augmentation of a COCO dataset")
    p.add_argument("mode", nargs="?", choices=("run", "preview"), default="run")
    p.add_argument("--in", dest="coco", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--copies", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--image-id", type=int, dest="image_id")
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--overlays")
    p.add_argument("--out", help="machine-readable JSON report")
    p.set_defaults(func=_cmd_evaluate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    threads = os.environ.get("CTXRAY_THREADS")
    if threads:
        cv2.setNumThreads(int(threads))
    try:
        return args.func(args)
    except CtxrayError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
