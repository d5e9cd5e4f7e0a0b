"""Training loop: SGD over a fixed number of steps per epoch with loss
logging to CSV and a checkpoint at the end."""

from __future__ import annotations

import csv
import logging
from pathlib import Path

import torch
from torch.utils.data import DataLoader

from .config import TrainConfig
from .data import CocoLesionDataset, collate
from .model import build_model, save_checkpoint

log = logging.getLogger("trainer")

LOSS_KEYS = (
    "loss_objectness",      # RPN class
    "loss_rpn_box_reg",     # RPN bbox
    "loss_classifier",      # head class
    "loss_box_reg",         # head bbox
    "loss_mask",            # mask
)


def _loader(dataset, config: TrainConfig, generator) -> DataLoader:
    return DataLoader(
        dataset,
        batch_size=config.batch_size,
        shuffle=True,
        collate_fn=collate,
        generator=generator,
        drop_last=False,
    )


def _endless(dataset, config: TrainConfig, generator):
    """Cycle the loader forever so epochs are a fixed step count."""
    while True:
        yield from _loader(dataset, config, generator)


def _epoch_mean(rows: list[dict]) -> dict:
    keys = LOSS_KEYS + ("total",)
    return {k: sum(r[k] for r in rows) / len(rows) for k in keys}


def _run_steps(model, batches, steps, optimizer, config) -> list[dict]:
    rows = []
    for _ in range(steps):
        images, targets = next(batches)
        losses = model(list(images), list(targets))
        total = sum(losses.values())
        if optimizer is not None:
            optimizer.zero_grad()
            total.backward()
            torch.nn.utils.clip_grad_norm_(
                model.parameters(), config.gradient_clip_norm
            )
            optimizer.step()
        row = {k: float(losses[k].detach()) if k in losses else 0.0 for k in LOSS_KEYS}
        row["total"] = float(total.detach())
        rows.append(row)
    return rows


def train(train_coco, val_coco, config: TrainConfig, out_dir) -> Path:
    """Train on train_coco, validate on val_coco, return checkpoint path.

    Writes per-epoch mean losses (training and validation) to
    training_log.csv and the effective config to config.json in out_dir.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(config.seed)
    generator = torch.Generator().manual_seed(config.seed)

    train_set = CocoLesionDataset(train_coco, config)
    val_set = CocoLesionDataset(val_coco, config) if val_coco else None
    model = build_model(config)
    model.train()
    optimizer = torch.optim.SGD(
        model.parameters(),
        lr=config.learning_rate,
        momentum=config.momentum,
        weight_decay=config.weight_decay,
    )

    config.save(out_dir / "config.json")
    log_path = out_dir / "training_log.csv"
    fieldnames = ["epoch", *LOSS_KEYS, "total", *[f"val_{k}" for k in LOSS_KEYS], "val_total"]
    with open(log_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        train_batches = _endless(train_set, config, generator)
        for epoch in range(1, config.epochs + 1):
            rows = _run_steps(model, train_batches, config.steps_per_epoch, optimizer, config)
            record = {"epoch": epoch, **_epoch_mean(rows)}
            if val_set is not None and config.validation_steps > 0:
                val_batches = _endless(val_set, config, generator)
                with torch.no_grad():
                    vrows = _run_steps(
                        model, val_batches, config.validation_steps, None, config
                    )
                record.update({f"val_{k}": v for k, v in _epoch_mean(vrows).items()})
            writer.writerow(record)
            fh.flush()
            log.info("epoch %d/%d: total loss %.4f", epoch, config.epochs, record["total"])

    ckpt = out_dir / "checkpoint.pt"
    save_checkpoint(model, config, ckpt)
    return ckpt
