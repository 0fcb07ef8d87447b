from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ops import ShapeMismatch


@dataclass
class OptimizerState:
    learning_rate: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 0.0005
    velocity: dict[str, np.ndarray] = field(default_factory=dict)


def sgd_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
             state: OptimizerState) -> dict[str, np.ndarray]:
    """One momentum-SGD update, applied in place; returns ``params``.

    v <- momentum * v - lr * (grad + weight_decay * param); param <- param + v
    """
    if set(params) != set(grads):
        raise ShapeMismatch("params and grads have different keys")
    lr, mom, wd = state.learning_rate, state.momentum, state.weight_decay
    for key, p in params.items():
        g = grads[key]
        if g.shape != p.shape:
            raise ShapeMismatch(f"{key}: grad {g.shape} != param {p.shape}")
        v = state.velocity.get(key)
        if v is None:
            v = state.velocity[key] = np.zeros_like(p)
        elif v.shape != p.shape:
            raise ShapeMismatch(f"{key}: velocity {v.shape} != param {p.shape}")
        v *= mom
        v -= lr * (g + wd * p)
        p += v
    return params


def lr_at_epoch(base_lr: float, epoch: int, milestones: list[int] | tuple[int, ...],
                factor: float = 0.1) -> float:
    """Milestone decay: multiply by ``factor`` at each milestone epoch (0-based)."""
    return base_lr * factor ** sum(epoch >= m for m in milestones)
