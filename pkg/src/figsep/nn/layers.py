"""Stateful layer wrappers and a sequential container."""

from __future__ import annotations

import numpy as np

from . import ops


class Layer:
    name = "layer"

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> dict[str, np.ndarray]:
        return {}

    def grads(self) -> dict[str, np.ndarray]:
        return {}


class Conv2D(Layer):
    def __init__(self, c_in: int, c_out: int, k: int, stride: int = 1, pad: int | None = None,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        self.stride = stride
        self.pad = k // 2 if pad is None else pad
        rng = rng if rng is not None else np.random.default_rng(0)
        # He-style uniform: Var = 2 / fan_in
        bound = np.sqrt(6.0 / (c_in * k * k))
        self.weight = rng.uniform(-bound, bound, size=(c_out, c_in, k, k)).astype(dtype)
        self.bias = np.zeros(c_out, dtype=dtype)
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)
        self._cache = None

    def forward(self, x):
        out, self._cache = ops.conv2d_forward(x, self.weight, self.bias, self.stride, self.pad)
        return out

    def backward(self, grad):
        dx, self.grad_weight, self.grad_bias = ops.conv2d_backward(grad, self._cache)
        self._cache = None
        return dx

    def params(self):
        return {"weight": self.weight, "bias": self.bias}

    def grads(self):
        return {"weight": self.grad_weight, "bias": self.grad_bias}


class LeakyReLU(Layer):
    def __init__(self, slope: float = 0.1):
        self.slope = slope
        self._x = None

    def forward(self, x):
        self._x = x
        return ops.leaky_relu(x, self.slope)

    def backward(self, grad):
        dx = ops.leaky_relu_backward(grad, self._x, self.slope)
        self._x = None
        return dx


class MaxPool2D(Layer):
    def __init__(self):
        self._cache = None

    def forward(self, x):
        out, self._cache = ops.maxpool2d_forward(x)
        return out

    def backward(self, grad):
        dx = ops.maxpool2d_backward(grad, self._cache)
        self._cache = None
        return dx


class BatchNorm2D(Layer):
    """Batch normalization; batch statistics in training, running averages otherwise."""

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5, dtype=np.float32):
        self.gamma = np.ones(channels, dtype=dtype)
        self.beta = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.grad_gamma = np.zeros_like(self.gamma)
        self.grad_beta = np.zeros_like(self.beta)
        self.momentum = momentum
        self.eps = eps
        self.training = True
        self._cache = None

    def forward(self, x):
        if not self.training:
            inv = (1.0 / np.sqrt(self.running_var + self.eps)).astype(x.dtype)
            scale = (self.gamma * inv)[None, :, None, None]
            shift = (self.beta - self.running_mean * self.gamma * inv)[None, :, None, None]
            return x * scale + shift
        out, self._cache, mean, var = ops.batchnorm_forward(x, self.gamma, self.beta, self.eps)
        n = x.shape[0] * x.shape[2] * x.shape[3]
        unbiased = var * n / max(n - 1, 1)
        self.running_mean *= 1.0 - self.momentum
        self.running_mean += (self.momentum * mean).astype(self.running_mean.dtype)
        self.running_var *= 1.0 - self.momentum
        self.running_var += (self.momentum * unbiased).astype(self.running_var.dtype)
        return out

    def backward(self, grad):
        dx, self.grad_gamma, self.grad_beta = ops.batchnorm_backward(grad, self._cache)
        self._cache = None
        return dx

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def grads(self):
        return {"gamma": self.grad_gamma, "beta": self.grad_beta}

    def buffers(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}


class Sequential:
    def __init__(self, layers: list[Layer]):
        self.layers = layers

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    __call__ = forward

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def train(self, mode: bool = True) -> None:
        for layer in self.layers:
            if hasattr(layer, "training"):
                layer.training = mode

    def named_buffers(self) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            for key, b in getattr(layer, "buffers", dict)().items():
                out[f"layer{i}.{key}"] = b
        return out

    def named_params(self) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            for key, p in layer.params().items():
                out[f"layer{i}.{key}"] = p
        return out

    def named_grads(self) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            for key, g in layer.grads().items():
                out[f"layer{i}.{key}"] = g
        return out

    def load_params(self, tensors: dict[str, np.ndarray]) -> None:
        own = {**self.named_params(), **self.named_buffers()}
        missing = set(own) - set(tensors)
        if missing:
            raise KeyError(f"missing tensors: {sorted(missing)}")
        for key, p in own.items():
            src = tensors[key]
            if src.shape != p.shape:
                raise ops.ShapeMismatch(f"{key}: {src.shape} != {p.shape}")
            p[...] = src
