"""ImageCLEF-style figure separation metrics.

A detection is correct when it covers more than ``overlap_threshold`` of a
ground-truth box. Per-figure accuracy is ``correct / max(#gt, #det)``;
dataset accuracy is the mean over figures. Average precision uses the
all-point interpolated precision envelope over the pooled ranking.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import BBox, Detection, iou, overlap_vs_gt

log = logging.getLogger(__name__)


class EmptyDataset(ValueError):
    pass


class OverlapDenominator(str, enum.Enum):
    GT_AREA = "gt_area"
    UNION = "union"


@dataclass(frozen=True)
class EvalConfig:
    overlap_threshold: float = 0.66
    overlap_denominator: OverlapDenominator = OverlapDenominator.GT_AREA

    def __post_init__(self) -> None:
        object.__setattr__(self, "overlap_denominator", OverlapDenominator(self.overlap_denominator))
        if not 0.0 < self.overlap_threshold <= 1.0:
            raise ValueError("overlap_threshold must lie in (0, 1]")

    def overlap(self, det: BBox, gt: BBox) -> float:
        if self.overlap_denominator is OverlapDenominator.UNION:
            return iou(det, gt)
        return overlap_vs_gt(det, gt)


@dataclass
class EvalReport:
    per_figure_accuracy: list[float]
    dataset_accuracy: float
    precision: float
    recall: float
    average_precision: float
    pr_points: list[tuple[float, float]] = field(default_factory=list)
    n_gt: int = 0
    n_det: int = 0
    both_empty_count: int = 0

    @property
    def n_figures(self) -> int:
        return len(self.per_figure_accuracy)

    def to_json_dict(self) -> dict:
        return {
            "accuracy": self.dataset_accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "map": self.average_precision,
            "n_figures": self.n_figures,
            "n_gt": self.n_gt,
            "n_det": self.n_det,
            "both_empty_count": self.both_empty_count,
        }

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n")


def _ranked(dets: Sequence[Detection]) -> list[int]:
    return sorted(range(len(dets)), key=lambda i: (-dets[i].confidence, i))


def match_figure(dets: Sequence[Detection], gts: Sequence[BBox],
                 config: EvalConfig = EvalConfig()) -> list[int | None]:
    """Greedy matching; returns, per detection, the matched gt index or None.

    Detections are visited by descending confidence; each claims the still
    unmatched gt with the highest overlap above the threshold. A gt is
    matched at most once, so duplicate detections only count once.
    """
    result: list[int | None] = [None] * len(dets)
    taken = [False] * len(gts)
    for i in _ranked(dets):
        best, best_j = config.overlap_threshold, None
        for j, gt in enumerate(gts):
            if taken[j]:
                continue
            ov = config.overlap(dets[i].box, gt)
            if ov > best:
                best, best_j = ov, j
        if best_j is not None:
            taken[best_j] = True
            result[i] = best_j
    return result


def figure_accuracy(dets: Sequence[Detection], gts: Sequence[BBox],
                    config: EvalConfig = EvalConfig()) -> float:
    if not dets and not gts:
        # nothing to find and nothing reported
        return 1.0
    matched = sum(m is not None for m in match_figure(dets, gts, config))
    return matched / max(len(gts), len(dets))


def average_precision(correct: Sequence[bool], n_gt: int, interpolate: bool = True) -> float:
    """AP of a confidence-ranked list of correctness flags against ``n_gt`` positives.

    With ``interpolate`` the precision at each rank is replaced by the maximum
    precision at any later rank (all-point envelope); otherwise precision at
    each true positive is used as-is.
    """
    if n_gt == 0:
        return 0.0 if len(correct) else 1.0
    if not len(correct):
        return 0.0
    flags = np.asarray(correct, dtype=bool)
    tp = np.cumsum(flags)
    precision = tp / np.arange(1, len(flags) + 1)
    if interpolate:
        precision = np.maximum.accumulate(precision[::-1])[::-1]
    return float(np.sum(precision[flags]) / n_gt)


def pr_curve(correct: Sequence[bool], n_gt: int) -> list[tuple[float, float]]:
    """(recall, interpolated precision) after every rank."""
    if not len(correct):
        return []
    flags = np.asarray(correct, dtype=bool)
    tp = np.cumsum(flags)
    precision = np.maximum.accumulate((tp / np.arange(1, len(flags) + 1))[::-1])[::-1]
    recall = tp / n_gt if n_gt else np.zeros(len(flags))
    return [(float(r), float(p)) for r, p in zip(recall, precision)]


def dataset_metrics(figures: Sequence[tuple[Sequence[Detection], Sequence[BBox]]],
                    config: EvalConfig = EvalConfig()) -> EvalReport:
    """Aggregate metrics over ``(detections, ground_truth)`` pairs, one per figure."""
    if not figures:
        raise EmptyDataset("no figures to evaluate")
    accs: list[float] = []
    pooled: list[tuple[float, int, int, bool]] = []
    n_gt = n_det = tp = both_empty = 0
    for fig_id, (dets, gts) in enumerate(figures):
        if not dets and not gts:
            both_empty += 1
        matching = match_figure(dets, gts, config)
        hits = sum(m is not None for m in matching)
        accs.append(1.0 if not dets and not gts else hits / max(len(gts), len(dets)))
        tp += hits
        n_gt += len(gts)
        n_det += len(dets)
        for i, (d, m) in enumerate(zip(dets, matching)):
            pooled.append((-d.confidence, fig_id, i, m is not None))
    if both_empty:
        log.warning("%d figure(s) with neither detections nor ground truth scored 1.0", both_empty)
    pooled.sort()
    correct = [c for *_, c in pooled]
    precision = tp / n_det if n_det else (1.0 if n_gt == 0 else 0.0)
    recall = tp / n_gt if n_gt else 1.0
    return EvalReport(
        per_figure_accuracy=accs,
        dataset_accuracy=float(np.mean(accs)),
        precision=precision,
        recall=recall,
        average_precision=average_precision(correct, n_gt),
        pr_points=pr_curve(correct, n_gt),
        n_gt=n_gt,
        n_det=n_det,
        both_empty_count=both_empty,
    )


def export_pr_curve(report: EvalReport, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["recall", "precision"])
        for r, p in report.pr_points:
            writer.writerow([repr(r), repr(p)])
