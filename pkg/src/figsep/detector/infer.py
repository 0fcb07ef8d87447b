from __future__ import annotations

import time

import numpy as np

from ..geometry import Detection
from .letterbox import letterbox, to_input
from .model import DetectorModel
from .nms import nms
from .targets import decode_predictions


def detect(model: DetectorModel, image: np.ndarray,
           conf_threshold: float | None = None) -> tuple[list[Detection], float]:
    """Detect subfigures in an (H, W, 3) uint8 image.

    Returns detections in the image's own normalized coordinates and the
    elapsed wall-clock time in milliseconds.
    """
    if image.ndim != 3 or image.shape[2] != 3 or image.size == 0:
        raise ValueError(f"expected a non-empty RGB image, got shape {image.shape}")
    t0 = time.perf_counter()
    cfg = model.config
    canvas, tf = letterbox(image, cfg.input_side_px)
    raw = model.forward(to_input([canvas]))[0]
    dets = decode_predictions(raw, cfg, conf_threshold)
    dets = nms(dets, cfg.nms_iou_threshold)
    out = []
    for d in dets:
        box = tf.from_letterbox(d.box)
        if box is not None:
            out.append(Detection(box, d.confidence))
    elapsed_ms = (time.perf_counter() - t0) * 1000.0
    return out, elapsed_ms
