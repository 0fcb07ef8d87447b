from __future__ import annotations

from typing import Sequence

from ..geometry import Detection, iou


def _rank_key(det: Detection):
    return (-det.confidence, det.box.as_tuple())


def nms(dets: Sequence[Detection], iou_threshold: float) -> list[Detection]:
    """Greedy suppression in descending confidence.

    Ties in confidence are broken by box coordinates (lexicographic), so the
    result is independent of input order.
    """
    kept: list[Detection] = []
    for det in sorted(dets, key=_rank_key):
        if all(iou(det.box, k.box) <= iou_threshold for k in kept):
            kept.append(det)
    return kept
