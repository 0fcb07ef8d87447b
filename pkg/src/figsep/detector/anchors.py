from __future__ import annotations

from typing import Sequence

import numpy as np

from ..geometry import BBox


class TooFewBoxes(ValueError):
    pass


def _centered_iou_matrix(wh: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    inter = np.minimum(wh[:, None, 0], centroids[None, :, 0]) * np.minimum(wh[:, None, 1], centroids[None, :, 1])
    area_a = wh[:, 0] * wh[:, 1]
    area_b = centroids[:, 0] * centroids[:, 1]
    return inter / (area_a[:, None] + area_b[None, :] - inter)


def mean_best_iou(boxes_wh: np.ndarray, centroids: np.ndarray) -> float:
    """Average over boxes of the best centered IOU with any centroid."""
    return float(_centered_iou_matrix(np.asarray(boxes_wh, float), np.asarray(centroids, float)).max(axis=1).mean())


def estimate_anchors(train_boxes: Sequence[BBox], k: int, seed: int = 0,
                     max_iter: int = 300) -> list[tuple[float, float]]:
    """k-means on box (w, h) with distance ``1 - centered IOU``.

    Centroids are seeded from k distinct box shapes picked by the seeded RNG
    and updated as the mean (w, h) of their members. Returned sorted by area.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(train_boxes) < k:
        raise TooFewBoxes(f"need at least {k} boxes, got {len(train_boxes)}")
    wh = np.array([[b.width, b.height] for b in train_boxes], dtype=np.float64)
    rng = np.random.default_rng(seed)
    uniq = np.unique(wh, axis=0)
    if len(uniq) >= k:
        centroids = uniq[rng.choice(len(uniq), size=k, replace=False)]
    else:
        centroids = uniq[rng.choice(len(uniq), size=k, replace=True)]
    assign = None
    for _ in range(max_iter):
        new_assign = np.argmax(_centered_iou_matrix(wh, centroids), axis=1)
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            members = wh[assign == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
    order = np.argsort(centroids[:, 0] * centroids[:, 1], kind="stable")
    return [(float(w), float(h)) for w, h in centroids[order]]
