"""Cross-entropy plus soft Dice loss with an analytic gradient."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidInput

DICE_SMOOTH = 1.0


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def seg_loss(logits, mask, smooth: float = DICE_SMOOTH) -> tuple[float, np.ndarray]:
    """Loss and its gradient with respect to ``logits``.

    ``logits`` has shape ``(N, C, H, W)`` (or ``(C, H, W)``) and ``mask`` holds
    integer labels of shape ``(N, H, W)`` (or ``(H, W)``). Per sample the loss
    is the pixel-mean cross-entropy plus ``1 - mean_c dice_c`` with soft Dice
    ``(2 I_c + smooth) / (P_c + G_c + smooth)``; samples are averaged.
    """
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(mask)
    single = z.ndim == 3
    if single:
        z, y = z[None], y[None]
    if z.ndim != 4 or y.shape != (z.shape[0],) + z.shape[2:]:
        raise InvalidInput(f"logits {np.shape(logits)} and mask {np.shape(mask)} are inconsistent")
    n, c, h, w = z.shape
    if y.size and (y.min() < 0 or y.max() >= c):
        raise InvalidInput(f"mask labels must lie in [0, {c})")
    hw = h * w

    logp = _log_softmax(z)
    p = np.exp(logp)
    g = np.zeros_like(z)
    np.put_along_axis(g, y[:, None].astype(np.intp), 1.0, axis=1)

    ce = -(logp * g).sum(axis=(1, 2, 3)) / hw
    inter = (p * g).sum(axis=(2, 3))
    den = p.sum(axis=(2, 3)) + g.sum(axis=(2, 3)) + smooth
    num = 2.0 * inter + smooth
    dice = num / den
    loss = float(np.mean(ce + 1.0 - dice.mean(axis=1)))

    # d(dice term)/dp, then back through the softmax
    q = -(2.0 * g * den[:, :, None, None] - num[:, :, None, None]) / (c * den[:, :, None, None] ** 2)
    grad_dice = p * (q - (p * q).sum(axis=1, keepdims=True))
    grad = ((p - g) / hw + grad_dice) / n
    return loss, grad[0] if single else grad
