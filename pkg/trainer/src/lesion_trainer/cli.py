"""Command-line entry point: `trainer train` and `trainer predict`."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from ctxray.errors import CtxrayError

from .config import TrainConfig
from .predict import predict
from .train import train

log = logging.getLogger("trainer")


def _load_config(path: str | None, overrides: list[str]) -> TrainConfig:
    values = json.loads(open(path, encoding="utf-8").read()) if path else {}
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        try:
            values[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            values[key.strip()] = raw.strip()
    return TrainConfig.from_dict(values)


def _cmd_train(args) -> int:
    config = _load_config(args.config, args.set or [])
    ckpt = train(args.train, args.val, config, args.out)
    print(f"checkpoint: {ckpt}")
    return 0


def _cmd_predict(args) -> int:
    out = predict(args.ckpt, args.images, args.out, args.score_threshold)
    print(f"predictions: {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trainer",
        description="Mask R-CNN training harness for lesion datasets",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on a COCO dataset")
    p.add_argument("--config", help="JSON config file (defaults otherwise)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a single config field")
    p.add_argument("--train", required=True, help="training COCO file")
    p.add_argument("--val", help="validation COCO file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="run inference over a manifest CSV")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--images", required=True, help="manifest CSV of input PNGs")
    p.add_argument("--out", required=True, help="output COCO file")
    p.add_argument("--score-threshold", type=float, dest="score_threshold")
    p.set_defaults(func=_cmd_predict)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (CtxrayError, ValueError, OSError) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
