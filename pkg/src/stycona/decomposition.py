"""Style-code / content-map view of an image.

Images are float32 arrays of shape ``(channels, height, width)`` with values
in ``[0, 1]``. Each channel is factorized independently; its singular values
are the style code and the rank-one matrices ``u_r v_r^T`` are the content
maps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput
from .linalg import SvdFactors, rank_one, reconstruct, svd


def as_image(img, *, check_range: bool = True) -> np.ndarray:
    """Coerce ``img`` to a channel-planar float32 array.

    A 2-D input is treated as a single channel.
    """
    a = np.asarray(img)
    if a.ndim == 2:
        a = a[None]
    if a.ndim != 3 or min(a.shape) < 1:
        raise InvalidInput(f"expected (channels, height, width), got shape {a.shape}")
    a = a.astype(np.float32, copy=False)
    if not np.all(np.isfinite(a)):
        raise InvalidInput("image contains NaN or Inf")
    if check_range and (a.min() < 0.0 or a.max() > 1.0):
        raise InvalidInput("image values must lie in [0, 1]")
    return a


@dataclass(frozen=True)
class StyleContent:
    factors: tuple[SvdFactors, ...]
    height: int
    width: int

    @property
    def channels(self) -> int:
        return len(self.factors)

    @property
    def k(self) -> int:
        return min(self.height, self.width)

    def style_codes(self) -> np.ndarray:
        """Singular values stacked as ``(channels, k)``."""
        return np.stack([f.sigma for f in self.factors])

    def reconstruct(self) -> np.ndarray:
        """Channel-planar float64 reconstruction, not clamped."""
        return np.stack([reconstruct(f) for f in self.factors])


def decompose(img) -> StyleContent:
    x = as_image(img)
    factors = tuple(svd(ch) for ch in x)
    return StyleContent(factors=factors, height=x.shape[1], width=x.shape[2])


def _with_sigma(f: SvdFactors, sigma: np.ndarray) -> SvdFactors:
    return SvdFactors(u=f.u, sigma=sigma, v=f.v)


def style_swap(a, b, *, clamp: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Exchange style codes between two equally shaped images.

    Returns ``(content of a with style of b, content of b with style of a)``.
    """
    xa, xb = as_image(a), as_image(b)
    if xa.shape != xb.shape:
        raise InvalidInput(f"shape mismatch: {xa.shape} vs {xb.shape}")
    sa, sb = decompose(xa), decompose(xb)
    out_a = np.stack([reconstruct(_with_sigma(fa, fb.sigma)) for fa, fb in zip(sa.factors, sb.factors)])
    out_b = np.stack([reconstruct(_with_sigma(fb, fa.sigma)) for fa, fb in zip(sa.factors, sb.factors)])
    if clamp:
        out_a, out_b = np.clip(out_a, 0.0, 1.0), np.clip(out_b, 0.0, 1.0)
    return out_a.astype(np.float32), out_b.astype(np.float32)


def content_maps(sc: StyleContent, channel: int, indices) -> list[np.ndarray]:
    """Scaled content maps ``sigma_r * u_r v_r^T`` for the requested ranks."""
    if not 0 <= channel < sc.channels:
        raise InvalidInput(f"channel {channel} out of range for {sc.channels} channels")
    f = sc.factors[channel]
    out = []
    for r in indices:
        if not 0 <= r < f.k:
            raise InvalidInput(f"index {r} out of range for k={f.k}")
        out.append(f.sigma[r] * rank_one(f, r))
    return out
