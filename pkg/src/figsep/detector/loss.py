from __future__ import annotations

import numpy as np

from ..nn.ops import ShapeMismatch, sigmoid
from .config import DetectorConfig


def detection_loss(raw: np.ndarray, targets: np.ndarray, mask: np.ndarray,
                   config: DetectorConfig) -> tuple[float, np.ndarray]:
    """Sum-squared grid loss and its gradient with respect to ``raw``.

    raw: (N, B*5, S, S) logits; targets: (N, B, 4, S, S); mask: (N, B, S, S).
    Per image::

        lambda_coord * sum_resp[(sig(tx)-x)^2 + (sig(ty)-y)^2 + (tw-w)^2 + (th-h)^2]
        + sum_resp (sig(conf)-1)^2 + lambda_noobj * sum_nonresp sig(conf)^2

    The returned loss is averaged over the N images of the batch; the
    gradient is scaled to match. Sums are accumulated in float64.
    """
    if raw.ndim != 4:
        raise ShapeMismatch(f"raw must be (N, B*5, S, S), got {raw.shape}")
    n, ch, s, s2 = raw.shape
    b = config.num_anchors
    if ch != b * 5 or s != s2:
        raise ShapeMismatch(f"raw shape {raw.shape} incompatible with {b} anchors")
    if targets.shape != (n, b, 4, s, s) or mask.shape != (n, b, s, s):
        raise ShapeMismatch(f"targets {targets.shape} / mask {mask.shape} do not match raw {raw.shape}")

    r = raw.reshape(n, b, 5, s, s).astype(np.float64)
    m = mask.astype(np.float64)
    lc, ln = config.lambda_coord, config.lambda_noobj
    grad = np.zeros_like(r)

    sxy = sigmoid(r[:, :, 0:2])
    dxy = (sxy - targets[:, :, 0:2]) * m[:, :, None]
    dwh = (r[:, :, 2:4] - targets[:, :, 2:4]) * m[:, :, None]
    sc = sigmoid(r[:, :, 4])
    dconf_obj = (sc - 1.0) * m
    dconf_noobj = sc * (1.0 - m)

    loss = (lc * (np.sum(dxy * dxy) + np.sum(dwh * dwh))
            + np.sum(dconf_obj * dconf_obj) + ln * np.sum(dconf_noobj * dconf_noobj))

    grad[:, :, 0:2] = 2.0 * lc * dxy * sxy * (1.0 - sxy)
    grad[:, :, 2:4] = 2.0 * lc * dwh
    grad[:, :, 4] = (2.0 * dconf_obj + 2.0 * ln * dconf_noobj) * sc * (1.0 - sc)

    return float(loss) / n, (grad / n).reshape(raw.shape).astype(raw.dtype)
