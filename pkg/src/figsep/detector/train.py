from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ..geometry import BBox
from ..nn import OptimizerState, lr_at_epoch, sgd_step
from .config import DetectorConfig
from .letterbox import letterbox, to_input
from .loss import detection_loss
from .model import DetectorModel
from .targets import encode_targets

log = logging.getLogger(__name__)


class EmptyDataset(ValueError):
    pass


class DivergenceDetected(RuntimeError):
    pass


@dataclass
class LossRecord:
    epoch: int
    batch: int
    loss: float
    lr: float
    resolution: int


@dataclass
class TrainResult:
    model: DetectorModel
    history: list[LossRecord] = field(default_factory=list)
    collisions: int = 0

    def epoch_means(self) -> list[float]:
        by_epoch: dict[int, list[float]] = {}
        for rec in self.history:
            by_epoch.setdefault(rec.epoch, []).append(rec.loss)
        return [float(np.mean(by_epoch[e])) for e in sorted(by_epoch)]


def write_loss_csv(history: Sequence[LossRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "batch", "loss", "lr", "resolution"])
        for rec in history:
            writer.writerow([rec.epoch, rec.batch, repr(rec.loss), repr(rec.lr), rec.resolution])


def _variant(canvas: np.ndarray, boxes: list[BBox], variant: int) -> tuple[np.ndarray, list[BBox]]:
    """Bit 0 of ``variant`` mirrors horizontally, bit 1 swaps the axes."""
    if variant & 2:
        canvas = canvas.transpose(1, 0, 2)
        boxes = [BBox(b.y_min, b.x_min, b.y_max, b.x_max) for b in boxes]
    if variant & 1:
        canvas = canvas[:, ::-1]
        boxes = [BBox(1.0 - b.x_max, b.y_min, 1.0 - b.x_min, b.y_max) for b in boxes]
    return np.ascontiguousarray(canvas), boxes


class _Prepared:
    """Letterboxed canvases and encoded targets, cached per (resolution, variant)."""

    def __init__(self, dataset, config: DetectorConfig):
        self.dataset = dataset
        self.config = config
        self._cache: dict[tuple[int, int], tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        self.collisions = 0

    def at(self, side: int, variant: int = 0):
        key = (side, variant)
        if key not in self._cache:
            s = side // self.config.stride
            imgs, tgts, masks = [], [], []
            for image, boxes in self.dataset:
                canvas, tf = letterbox(image, side)
                canvas, lb_boxes = _variant(canvas, [tf.to_letterbox(b) for b in boxes], variant)
                enc = encode_targets(lb_boxes, self.config, grid_side=s)
                if variant == 0:
                    self.collisions += enc.collisions
                imgs.append(canvas)
                tgts.append(enc.values)
                masks.append(enc.mask)
            self._cache[key] = (np.stack(imgs), np.stack(tgts), np.stack(masks))
        return self._cache[key]

    def batch(self, side: int, idx: np.ndarray, variants: np.ndarray):
        parts = [self.at(side, int(v)) for v in variants]
        imgs = np.stack([p[0][i] for p, i in zip(parts, idx)])
        tgts = np.stack([p[1][i] for p, i in zip(parts, idx)])
        masks = np.stack([p[2][i] for p, i in zip(parts, idx)])
        return to_input(imgs), tgts, masks


def _clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    norm = math.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads.values()))
    if norm > max_norm:
        for g in grads.values():
            g *= max_norm / norm
    return norm


def train(dataset: Sequence[tuple[np.ndarray, Sequence[BBox]]], config: DetectorConfig,
          seed: int | None = None, model: DetectorModel | None = None,
          progress: Callable[[LossRecord], None] | None = None) -> TrainResult:
    """Mini-batch momentum SGD with milestone decay and multi-scale inputs.

    ``dataset`` holds ``(rgb uint8 image, ground-truth boxes)`` pairs. Every
    ``multiscale_every`` batches the working side is redrawn from
    ``multiscale_sides``.
    """
    if len(dataset) == 0:
        raise EmptyDataset("training dataset is empty")
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    model = model or DetectorModel(config, seed=seed)
    state = OptimizerState(config.lr, config.momentum, config.weight_decay)
    prepared = _Prepared(dataset, config)
    sides = list(config.multiscale_sides) or [config.input_side_px]
    n = len(dataset)
    batches_per_epoch = math.ceil(n / config.batch_size)
    history: list[LossRecord] = []
    side = config.input_side_px
    step = 0
    model.train_mode(True)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_lr = lr_at_epoch(config.lr, epoch, config.lr_milestones, config.lr_decay)
        for b in range(batches_per_epoch):
            if step % config.multiscale_every == 0:
                side = int(sides[rng.integers(len(sides))])
            idx = order[b * config.batch_size:(b + 1) * config.batch_size]
            variants = np.zeros(len(idx), dtype=int)
            if config.train_hflip_prob:
                variants += rng.random(len(idx)) < config.train_hflip_prob
            if config.train_transpose_prob:
                variants += 2 * (rng.random(len(idx)) < config.train_transpose_prob)
            x, t, m = prepared.batch(side, idx, variants)
            lr = epoch_lr
            if config.warmup_batches and step < config.warmup_batches:
                lr = epoch_lr * (step + 1) / config.warmup_batches
            state.learning_rate = lr
            raw = model.forward(x)
            loss, grad = detection_loss(raw, t, m, config)
            if not math.isfinite(loss):
                raise DivergenceDetected(f"non-finite loss at epoch {epoch}, batch {b}")
            model.backward(grad)
            grads = model.grads()
            if config.grad_clip_norm:
                _clip_global_norm(grads, config.grad_clip_norm)
            sgd_step(model.params(), grads, state)
            rec = LossRecord(epoch, b, loss, lr, side)
            history.append(rec)
            if progress:
                progress(rec)
            step += 1
        if history:
            log.info("epoch %d: mean loss %.4f (lr %.2g)", epoch,
                     np.mean([r.loss for r in history[-batches_per_epoch:]]), epoch_lr)
    model.train_mode(False)
    return TrainResult(model, history, prepared.collisions)
