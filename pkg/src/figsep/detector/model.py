from __future__ import annotations

from pathlib import Path

import numpy as np

from ..nn import BatchNorm2D, Conv2D, LeakyReLU, MaxPool2D, Sequential, load_weights, save_weights
from .config import DetectorConfig


def build_backbone(config: DetectorConfig, rng: np.random.Generator) -> Sequential:
    layers = []
    c_in = 3
    for i, c_out in enumerate(config.channels):
        layers.append(Conv2D(c_in, c_out, 3, rng=rng))
        if config.batch_norm:
            layers.append(BatchNorm2D(c_out))
        layers.append(LeakyReLU(config.leaky_slope))
        if i in config.pool_after:
            layers.append(MaxPool2D())
        c_in = c_out
    head = Conv2D(c_in, config.num_anchors * 5, 1, rng=rng)
    # small head init keeps early confidences near 0.5 rather than saturated
    head.weight *= 0.1
    layers.append(head)
    return Sequential(layers)


class DetectorModel:
    """Compact convolutional backbone plus 1x1 head emitting B*5 maps per grid cell."""

    def __init__(self, config: DetectorConfig, seed: int | None = None):
        self.config = config
        rng = np.random.default_rng(config.seed if seed is None else seed)
        self.net = build_backbone(config, rng)
        self.net.train(False)

    def train_mode(self, mode: bool = True) -> None:
        self.net.train(mode)

    def forward(self, x: np.ndarray) -> np.ndarray:
        """x: (N, 3, H, W) float32 in [0, 1] -> raw logits (N, B*5, H/stride, W/stride)."""
        if self.config.input_center:
            x = x - np.float32(self.config.input_center)
        return self.net.forward(x)

    __call__ = forward

    def backward(self, grad: np.ndarray) -> None:
        self.net.backward(grad)

    def params(self) -> dict[str, np.ndarray]:
        return self.net.named_params()

    def grads(self) -> dict[str, np.ndarray]:
        return self.net.named_grads()

    def state_tensors(self) -> dict[str, np.ndarray]:
        tensors = {**self.params(), **self.net.named_buffers()}
        tensors["anchors"] = np.asarray(self.config.anchors, dtype=np.float32)
        return tensors

    def save(self, path: str | Path) -> None:
        """Write the weight file and a ``<path>.json`` config sidecar."""
        path = Path(path)
        save_weights(path, self.state_tensors())
        self.config.save(config_sidecar(path))

    @classmethod
    def load(cls, path: str | Path, config: DetectorConfig | None = None) -> "DetectorModel":
        path = Path(path)
        tensors = load_weights(path)
        file_anchors = tensors.pop("anchors", None)
        if config is None:
            sidecar = config_sidecar(path)
            if sidecar.exists():
                config = DetectorConfig.load(sidecar)
            elif file_anchors is not None:
                anchors = [tuple(map(float, a)) for a in file_anchors]
                config = DetectorConfig(anchors=anchors, num_anchors=len(anchors))
            else:
                config = DetectorConfig()
        model = cls(config)
        model.net.load_params(tensors)
        return model


def config_sidecar(weights_path: str | Path) -> Path:
    weights_path = Path(weights_path)
    return weights_path.with_name(weights_path.name + ".json")
