"""Minimal NCHW layer library with explicit backward passes."""

from .gradcheck import grad_check
from .layers import BatchNorm2D, Conv2D, Layer, LeakyReLU, MaxPool2D, Sequential
from .ops import (
    ShapeMismatch,
    conv2d_backward,
    conv2d_forward,
    leaky_relu,
    leaky_relu_backward,
    maxpool2d_backward,
    maxpool2d_forward,
    sigmoid,
    sigmoid_backward,
)
from .optim import OptimizerState, lr_at_epoch, sgd_step
from .serialize import WeightFormatError, load_weights, save_weights

__all__ = [
    "BatchNorm2D", "Conv2D", "Layer", "LeakyReLU", "MaxPool2D", "Sequential", "ShapeMismatch",
    "OptimizerState", "WeightFormatError", "conv2d_backward", "conv2d_forward",
    "grad_check", "leaky_relu", "leaky_relu_backward", "load_weights", "lr_at_epoch",
    "maxpool2d_backward", "maxpool2d_forward", "save_weights", "sgd_step", "sigmoid",
    "sigmoid_backward",
]
