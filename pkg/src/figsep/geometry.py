"""Normalized axis-aligned bounding boxes and overlap measures.

Coordinates are fractions of image width/height. Pixel boxes are converted
at I/O boundaries with :meth:`BBox.from_pixels` / :meth:`BBox.to_pixels`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable


class InvalidBox(ValueError):
    """Raised when box coordinates violate 0 <= min < max <= 1."""


@dataclass(frozen=True, order=True)
class BBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        x0, y0, x1, y1 = self.x_min, self.y_min, self.x_max, self.y_max
        if not is_valid(x0, y0, x1, y1):
            raise InvalidBox(f"invalid box ({x0}, {y0}, {x1}, {y1})")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float, clip: bool = False) -> "BBox":
        x0, y0, x1, y1 = cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2
        if clip:
            x0, y0 = max(0.0, x0), max(0.0, y0)
            x1, y1 = min(1.0, x1), min(1.0, y1)
        return cls(x0, y0, x1, y1)

    @classmethod
    def from_pixels(cls, x0: float, y0: float, x1: float, y1: float,
                    width: int, height: int) -> "BBox":
        """Box from pixel coordinates (half-open intervals) in a width x height image."""
        return cls(x0 / width, y0 / height, x1 / width, y1 / height)

    def to_pixels(self, width: int, height: int) -> tuple[int, int, int, int]:
        """Rounded pixel box ``(x0, y0, x1, y1)``, half-open."""
        return (
            int(round(self.x_min * width)),
            int(round(self.y_min * height)),
            int(round(self.x_max * width)),
            int(round(self.y_max * height)),
        )


def is_valid(x0: float, y0: float, x1: float, y1: float) -> bool:
    # a box so thin that its area underflows to zero cannot serve as a denominator
    return 0.0 <= x0 < x1 <= 1.0 and 0.0 <= y0 < y1 <= 1.0 and (x1 - x0) * (y1 - y0) > 0.0


def intersection_area(a: BBox, b: BBox) -> float:
    w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if w <= 0.0 or h <= 0.0:
        return 0.0
    return w * h


def iou(a: BBox, b: BBox) -> float:
    if a == b:
        return 1.0
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    union = a.area + b.area - inter
    return min(1.0, inter / union)


def overlap_vs_gt(det: BBox, gt: BBox) -> float:
    """Fraction of the ground-truth box covered by the detection."""
    return intersection_area(det, gt) / gt.area


def max_pairwise_iou(boxes: Iterable[BBox]) -> float:
    boxes = list(boxes)
    best = 0.0
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            best = max(best, iou(boxes[i], boxes[j]))
    return best


def centered_iou(wh_a: tuple[float, float], wh_b: tuple[float, float]) -> float:
    """IOU of two boxes sharing a center, given only their (w, h)."""
    inter = min(wh_a[0], wh_b[0]) * min(wh_a[1], wh_b[1])
    return inter / (wh_a[0] * wh_a[1] + wh_b[0] * wh_b[1] - inter)


@dataclass(frozen=True)
class Detection:
    box: BBox
    confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
