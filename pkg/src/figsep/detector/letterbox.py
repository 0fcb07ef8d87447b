from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from ..geometry import BBox

PAD_VALUE = 128


@dataclass(frozen=True)
class LetterboxTransform:
    """Maps normalized original-image coordinates into a square letterbox canvas."""

    side: int
    scaled_w: int
    scaled_h: int
    pad_x: int
    pad_y: int

    def to_letterbox(self, box: BBox) -> BBox:
        s = self.side
        return BBox(
            (box.x_min * self.scaled_w + self.pad_x) / s,
            (box.y_min * self.scaled_h + self.pad_y) / s,
            (box.x_max * self.scaled_w + self.pad_x) / s,
            (box.y_max * self.scaled_h + self.pad_y) / s,
        )

    def from_letterbox(self, box: BBox) -> BBox | None:
        """Inverse mapping, clipped to the original image; ``None`` if nothing is left."""
        s = self.side
        x0 = min(max((box.x_min * s - self.pad_x) / self.scaled_w, 0.0), 1.0)
        y0 = min(max((box.y_min * s - self.pad_y) / self.scaled_h, 0.0), 1.0)
        x1 = min(max((box.x_max * s - self.pad_x) / self.scaled_w, 0.0), 1.0)
        y1 = min(max((box.y_max * s - self.pad_y) / self.scaled_h, 0.0), 1.0)
        if x1 <= x0 or y1 <= y0:
            return None
        return BBox(x0, y0, x1, y1)


def letterbox_transform(width: int, height: int, side: int) -> LetterboxTransform:
    scale = side / max(width, height)
    sw = max(1, min(side, int(round(width * scale))))
    sh = max(1, min(side, int(round(height * scale))))
    return LetterboxTransform(side, sw, sh, (side - sw) // 2, (side - sh) // 2)


def letterbox(image: np.ndarray, side: int) -> tuple[np.ndarray, LetterboxTransform]:
    """Aspect-preserving resize of an (H, W, 3) uint8 image onto a gray square canvas."""
    h, w = image.shape[:2]
    tf = letterbox_transform(w, h, side)
    resized = Image.fromarray(image).resize((tf.scaled_w, tf.scaled_h), Image.BILINEAR)
    canvas = np.full((side, side, 3), PAD_VALUE, dtype=np.uint8)
    canvas[tf.pad_y:tf.pad_y + tf.scaled_h, tf.pad_x:tf.pad_x + tf.scaled_w] = np.asarray(resized)
    return canvas, tf


def to_input(images: list[np.ndarray] | np.ndarray) -> np.ndarray:
    """Stack (H, W, 3) uint8 images into an (N, 3, H, W) float32 batch in [0, 1]."""
    arr = np.stack(images) if isinstance(images, list) else images
    return np.ascontiguousarray(arr.transpose(0, 3, 1, 2), dtype=np.float32) / np.float32(255.0)
