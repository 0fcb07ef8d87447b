"""Functional forward/backward kernels on NCHW numpy arrays.

Each ``*_forward`` returns ``(output, cache)``; the matching ``*_backward``
consumes the upstream gradient and that cache. Kernels are dtype-preserving,
so float64 inputs give float64 gradients (used by the gradient checker).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class ShapeMismatch(ValueError):
    pass


def _conv_out(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def _im2col(x: np.ndarray, k: int, stride: int, pad: int) -> tuple[np.ndarray, int, int]:
    n, c, h, w = x.shape
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho, wo = _conv_out(h, k, stride, pad), _conv_out(w, k, stride, pad)
    win = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
    # (N, Ho, Wo, C, k, k) -> rows are output positions
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(n * ho * wo, c * k * k)
    return cols, ho, wo


def conv2d_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray,
                   stride: int = 1, pad: int = 0):
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeMismatch(f"conv2d expects 4-D input and weight, got {x.shape}, {weight.shape}")
    c_out, c_in, kh, kw = weight.shape
    if kh != kw:
        raise ShapeMismatch("only square kernels are supported")
    if x.shape[1] != c_in:
        raise ShapeMismatch(f"input has {x.shape[1]} channels, weight expects {c_in}")
    if bias.shape != (c_out,):
        raise ShapeMismatch(f"bias shape {bias.shape} != ({c_out},)")
    n, _, h, w = x.shape
    if _conv_out(h, kh, stride, pad) < 1 or _conv_out(w, kh, stride, pad) < 1:
        raise ShapeMismatch(f"kernel {kh} does not fit input {h}x{w} with pad {pad}")
    cols, ho, wo = _im2col(x, kh, stride, pad)
    wmat = weight.reshape(c_out, -1)
    out = cols @ wmat.T
    out += bias
    out = out.reshape(n, ho, wo, c_out).transpose(0, 3, 1, 2)
    cache = (x.shape, cols, weight, stride, pad, ho, wo)
    return np.ascontiguousarray(out), cache


def conv2d_backward(grad_out: np.ndarray, cache):
    x_shape, cols, weight, stride, pad, ho, wo = cache
    n, c_in, h, w = x_shape
    c_out, _, k, _ = weight.shape
    if grad_out.shape != (n, c_out, ho, wo):
        raise ShapeMismatch(f"grad_out shape {grad_out.shape} != {(n, c_out, ho, wo)}")
    g2 = grad_out.transpose(0, 2, 3, 1).reshape(-1, c_out)
    grad_w = (g2.T @ cols).reshape(weight.shape)
    grad_b = g2.sum(axis=0, dtype=np.float64).astype(grad_out.dtype)
    dcols = (g2 @ weight.reshape(c_out, -1)).reshape(n, ho, wo, c_in, k, k)
    dcols = dcols.transpose(0, 3, 4, 5, 1, 2)  # N, C, k, k, Ho, Wo
    hp, wp = h + 2 * pad, w + 2 * pad
    dx = np.zeros((n, c_in, hp, wp), dtype=grad_out.dtype)
    for i in range(k):
        for j in range(k):
            dx[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += dcols[:, :, i, j]
    if pad:
        dx = dx[:, :, pad:pad + h, pad:pad + w]
    return np.ascontiguousarray(dx), grad_w, grad_b


def maxpool2d_forward(x: np.ndarray, window: int = 2, stride: int = 2):
    if x.ndim != 4:
        raise ShapeMismatch(f"maxpool expects 4-D input, got {x.shape}")
    if window != 2 or stride != 2:
        raise ShapeMismatch("only 2x2 windows with stride 2 are supported")
    n, c, h, w = x.shape
    # odd sides are padded by replicating the last row/column
    if h % 2 or w % 2:
        x = np.pad(x, ((0, 0), (0, 0), (0, h % 2), (0, w % 2)), mode="edge")
    hp, wp = x.shape[2], x.shape[3]
    win = x.reshape(n, c, hp // 2, 2, wp // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, hp // 2, wp // 2, 4)
    arg = win.argmax(axis=-1)  # first index wins ties
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
    return out, ((n, c, h, w), arg)


def maxpool2d_backward(grad_out: np.ndarray, cache):
    (n, c, h, w), arg = cache
    if grad_out.shape != arg.shape:
        raise ShapeMismatch(f"grad_out shape {grad_out.shape} != {arg.shape}")
    ho, wo = arg.shape[2], arg.shape[3]
    win = np.zeros((n, c, ho, wo, 4), dtype=grad_out.dtype)
    np.put_along_axis(win, arg[..., None], grad_out[..., None], axis=-1)
    dx = win.reshape(n, c, ho, wo, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, 2 * ho, 2 * wo)
    if 2 * ho != h or 2 * wo != w:
        # fold gradient of replicated padding back onto the edge it copied
        if 2 * ho != h:
            dx[:, :, h - 1, :] += dx[:, :, h, :]
        if 2 * wo != w:
            dx[:, :, :, w - 1] += dx[:, :, :, w]
        dx = dx[:, :, :h, :w]
    return np.ascontiguousarray(dx)


def leaky_relu(x: np.ndarray, slope: float = 0.1) -> np.ndarray:
    return np.where(x >= 0, x, x * slope)


def leaky_relu_backward(grad_out: np.ndarray, x: np.ndarray, slope: float = 0.1) -> np.ndarray:
    return np.where(x >= 0, grad_out, grad_out * slope)


def sigmoid(x):
    x = np.asarray(x)
    # split by sign to avoid overflow in exp
    out = np.empty_like(x, dtype=np.result_type(x, np.float32))
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_backward(grad_out: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Chain rule given the sigmoid *output* ``y``."""
    return grad_out * y * (1.0 - y)


def batchnorm_forward(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float = 1e-5):
    """Per-channel batch normalization over (N, H, W) using batch statistics."""
    if x.ndim != 4 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise ShapeMismatch(f"batchnorm shapes: x {x.shape}, gamma {gamma.shape}, beta {beta.shape}")
    mean = x.mean(axis=(0, 2, 3), dtype=np.float64)
    var = x.var(axis=(0, 2, 3), dtype=np.float64)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = ((x - mean[None, :, None, None]) * inv_std[None, :, None, None]).astype(x.dtype)
    out = xhat * gamma[None, :, None, None] + beta[None, :, None, None]
    return out, (xhat, inv_std.astype(x.dtype), gamma), mean, var


def batchnorm_backward(grad_out: np.ndarray, cache):
    xhat, inv_std, gamma = cache
    m = grad_out.shape[0] * grad_out.shape[2] * grad_out.shape[3]
    grad_beta = grad_out.sum(axis=(0, 2, 3), dtype=np.float64).astype(grad_out.dtype)
    grad_gamma = (grad_out * xhat).sum(axis=(0, 2, 3), dtype=np.float64).astype(grad_out.dtype)
    dxhat = grad_out * gamma[None, :, None, None]
    dx = (inv_std[None, :, None, None] / m) * (
        m * dxhat
        - grad_beta[None, :, None, None] * gamma[None, :, None, None]
        - xhat * (grad_gamma * gamma)[None, :, None, None]
    )
    return dx.astype(grad_out.dtype), grad_gamma, grad_beta
