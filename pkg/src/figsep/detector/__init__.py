"""Single-shot grid detector for subfigure bounding boxes."""

from .anchors import TooFewBoxes, estimate_anchors, mean_best_iou
from .config import DetectorConfig
from .infer import detect
from .letterbox import LetterboxTransform, letterbox, letterbox_transform
from .loss import detection_loss
from .model import DetectorModel
from .nms import nms
from .targets import Targets, decode_predictions, encode_targets, targets_to_raw
from .train import DivergenceDetected, EmptyDataset, LossRecord, TrainResult, train, write_loss_csv

__all__ = [
    "DetectorConfig", "DetectorModel", "DivergenceDetected", "EmptyDataset",
    "LetterboxTransform", "LossRecord", "Targets", "TooFewBoxes", "TrainResult",
    "decode_predictions", "detect", "detection_loss", "encode_targets",
    "estimate_anchors", "letterbox", "letterbox_transform", "mean_best_iou", "nms",
    "targets_to_raw", "train", "write_loss_csv",
]
