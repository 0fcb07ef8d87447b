from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


def grad_check(forward_fn: Callable[[Sequence[np.ndarray]], tuple[float, Sequence[np.ndarray]]],
               inputs: Sequence[np.ndarray], epsilon: float = 1e-3) -> float:
    """Max relative error between central differences and analytic gradients.

    ``forward_fn(inputs)`` must return ``(scalar, grads)`` with one gradient
    array per input. Inputs are perturbed in place and restored.
    """
    inputs = [np.asarray(x) for x in inputs]
    _, analytic = forward_fn(inputs)
    worst = 0.0
    for x, g_an in zip(inputs, analytic):
        g_an = np.asarray(g_an, dtype=np.float64)
        flat = x.reshape(-1)
        g_flat = g_an.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            f_plus = float(forward_fn(inputs)[0])
            flat[i] = orig - epsilon
            f_minus = float(forward_fn(inputs)[0])
            flat[i] = orig
            g_fd = (f_plus - f_minus) / (2.0 * epsilon)
            denom = max(abs(g_fd), abs(g_flat[i]), 1e-8)
            worst = max(worst, abs(g_fd - g_flat[i]) / denom)
    return worst
