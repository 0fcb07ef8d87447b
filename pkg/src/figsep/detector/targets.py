"""Grid-cell target encoding and prediction decoding.

Raw network output for one image has shape ``(B*5, S, S)``; channel
``a*5 + j`` holds, for anchor ``a``, the logits ``(tx, ty, tw, th, conf)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..geometry import BBox, Detection, InvalidBox, centered_iou
from ..nn.ops import ShapeMismatch, sigmoid
from .config import DetectorConfig

log = logging.getLogger(__name__)


@dataclass
class Targets:
    """Encoded ground truth for one image.

    ``values[a, :, gy, gx]`` = (in-cell x offset, in-cell y offset,
    log w ratio, log h ratio) for responsible slots; ``mask`` marks them.
    """

    values: np.ndarray  # (B, 4, S, S)
    mask: np.ndarray  # (B, S, S) bool
    collisions: int = 0


def best_anchor(w: float, h: float, anchors: Sequence[tuple[float, float]]) -> int:
    ious = [centered_iou((w, h), a) for a in anchors]
    return int(np.argmax(ious))


def encode_targets(gt_boxes: Sequence[BBox], config: DetectorConfig,
                   grid_side: int | None = None) -> Targets:
    s = grid_side or config.grid_side
    n_anchor = config.num_anchors
    values = np.zeros((n_anchor, 4, s, s), dtype=np.float64)
    mask = np.zeros((n_anchor, s, s), dtype=bool)
    held_area = np.zeros((n_anchor, s, s), dtype=np.float64)
    collisions = 0
    for box in gt_boxes:
        if not isinstance(box, BBox):
            raise InvalidBox(f"not a BBox: {box!r}")
        cx, cy = box.center
        gx, gy = min(int(cx * s), s - 1), min(int(cy * s), s - 1)
        a = best_anchor(box.width, box.height, config.anchors)
        if mask[a, gy, gx]:
            collisions += 1
            if box.area <= held_area[a, gy, gx]:
                continue
        aw, ah = config.anchors[a]
        values[a, :, gy, gx] = (cx * s - gx, cy * s - gy, np.log(box.width / aw), np.log(box.height / ah))
        mask[a, gy, gx] = True
        held_area[a, gy, gx] = box.area
    if collisions:
        log.debug("encode_targets: %d cell/anchor collisions", collisions)
    return Targets(values, mask, collisions)


def targets_to_raw(targets: Targets, conf_logit: float = 30.0) -> np.ndarray:
    """Place encoded targets into raw logit slots (inverse of the decode transform)."""
    n_anchor, _, s, _ = targets.values.shape
    raw = np.zeros((n_anchor, 5, s, s), dtype=np.float64)
    off = np.clip(targets.values[:, :2], 1e-12, 1 - 1e-12)
    raw[:, :2] = np.log(off) - np.log1p(-off)
    raw[:, 2:4] = targets.values[:, 2:4]
    raw[:, 4] = np.where(targets.mask, conf_logit, -conf_logit)
    return raw.reshape(n_anchor * 5, s, s)


def decode_arrays(raw: np.ndarray, anchors: Sequence[tuple[float, float]]):
    """Vectorized decode: returns ``(boxes[M, 4], conf[M])`` for every slot, unclipped order a, gy, gx."""
    n_anchor = len(anchors)
    if raw.ndim != 3 or raw.shape[0] != n_anchor * 5 or raw.shape[1] != raw.shape[2]:
        raise ShapeMismatch(f"raw shape {raw.shape} != ({n_anchor * 5}, S, S)")
    s = raw.shape[1]
    r = raw.reshape(n_anchor, 5, s, s).astype(np.float64)
    gx = np.arange(s)[None, None, :]
    gy = np.arange(s)[None, :, None]
    anc = np.asarray(anchors, dtype=np.float64)
    cx = (sigmoid(r[:, 0]) + gx) / s
    cy = (sigmoid(r[:, 1]) + gy) / s
    with np.errstate(over="ignore"):
        w = np.clip(anc[:, 0, None, None] * np.exp(r[:, 2]), 0.0, 1.0)
        h = np.clip(anc[:, 1, None, None] * np.exp(r[:, 3]), 0.0, 1.0)
    conf = sigmoid(r[:, 4])
    boxes = np.stack([
        np.clip(cx - w / 2, 0.0, 1.0), np.clip(cy - h / 2, 0.0, 1.0),
        np.clip(cx + w / 2, 0.0, 1.0), np.clip(cy + h / 2, 0.0, 1.0),
    ], axis=-1)
    return boxes.reshape(-1, 4), conf.reshape(-1)


def decode_predictions(raw: np.ndarray, config: DetectorConfig,
                       conf_threshold: float | None = None) -> list[Detection]:
    thr = config.conf_threshold if conf_threshold is None else conf_threshold
    boxes, conf = decode_arrays(raw, config.anchors)
    keep = (conf >= thr) & (boxes[:, 2] > boxes[:, 0]) & (boxes[:, 3] > boxes[:, 1])
    return [Detection(BBox(*map(float, b)), float(c)) for b, c in zip(boxes[keep], conf[keep])]
