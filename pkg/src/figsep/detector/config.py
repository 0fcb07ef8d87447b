from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path


@dataclass
class DetectorConfig:
    """Architecture, anchor, and training hyperparameters.

    Desk-scale defaults. The full-size settings (stride 32, 160 epochs with
    decay at 60 and 90, batch 64, lr 1e-3) are all reachable through these
    fields.
    """

    input_side_px: int = 128
    stride: int = 8
    num_anchors: int = 5
    anchors: list[tuple[float, float]] = field(default_factory=lambda: [
        (0.08, 0.08), (0.15, 0.12), (0.12, 0.22), (0.28, 0.18), (0.4, 0.35),
    ])
    channels: tuple[int, ...] = (16, 32, 64, 64, 128, 128)
    pool_after: tuple[int, ...] = (0, 1, 2)
    leaky_slope: float = 0.1
    batch_norm: bool = True
    input_center: float = 0.5
    conf_threshold: float = 0.25
    nms_iou_threshold: float = 0.45
    lambda_coord: float = 5.0
    lambda_noobj: float = 0.5
    epochs: int = 60
    lr: float = 0.005
    lr_milestones: tuple[int, ...] = (30, 45)
    lr_decay: float = 0.1
    warmup_batches: int = 50
    grad_clip_norm: float = 100.0
    train_hflip_prob: float = 0.0
    train_transpose_prob: float = 0.0
    momentum: float = 0.9
    weight_decay: float = 0.0005
    batch_size: int = 16
    multiscale_sides: tuple[int, ...] = (96, 128, 160)
    multiscale_every: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        self.anchors = [tuple(float(v) for v in a) for a in self.anchors]
        self.channels = tuple(self.channels)
        self.pool_after = tuple(self.pool_after)
        self.lr_milestones = tuple(self.lr_milestones)
        self.multiscale_sides = tuple(self.multiscale_sides)
        self.validate()

    def validate(self) -> None:
        if self.stride != 2 ** len(self.pool_after):
            raise ValueError(f"stride {self.stride} does not match {len(self.pool_after)} pooling layers")
        if self.input_side_px % self.stride:
            raise ValueError(f"input_side_px {self.input_side_px} not divisible by stride {self.stride}")
        for side in self.multiscale_sides:
            if side % self.stride:
                raise ValueError(f"multi-scale side {side} not divisible by stride {self.stride}")
        if len(self.anchors) != self.num_anchors:
            raise ValueError(f"{len(self.anchors)} anchors given, num_anchors={self.num_anchors}")
        if any(w <= 0 or h <= 0 for w, h in self.anchors):
            raise ValueError("anchors must be positive")
        if not 0.0 <= self.conf_threshold <= 1.0:
            raise ValueError("conf_threshold must lie in [0, 1]")
        for name in ("train_hflip_prob", "train_transpose_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.grad_clip_norm < 0:
            raise ValueError("grad_clip_norm must be >= 0 (0 disables clipping)")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")

    @property
    def grid_side(self) -> int:
        return self.input_side_px // self.stride

    def to_dict(self) -> dict:
        d = asdict(self)
        d["anchors"] = [list(a) for a in self.anchors]
        for key, val in d.items():
            if isinstance(val, tuple):
                d[key] = list(val)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DetectorConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "DetectorConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))
