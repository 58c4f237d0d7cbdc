"""Synthetic two-domain segmentation data.

Each image holds one or more filled ellipses (label 1) on a background.
Domains differ in style (foreground/background intensity, gamma, noise) and
in content (background texture).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from ..augmentation import stream
from ..errors import InvalidInput
from ..imagio import Dataset

TEXTURES = ("none", "stripes", "blobs")


def _range(v, name):
    lo, hi = float(v[0]), float(v[1])
    if not lo <= hi:
        raise InvalidInput(f"{name}: degenerate range {v!r}")
    return lo, hi


@dataclass(frozen=True)
class SynthDomainSpec:
    """Generator parameters for one synthetic domain.

    Ranges are ``(low, high)`` and are sampled uniformly per image. Lengths
    are fractions of the image side.
    """

    domain: int = 0
    size: tuple[int, int] = (64, 64)
    objects: tuple[int, int] = (1, 2)
    center: tuple[float, float] = (0.3, 0.7)
    axes: tuple[float, float] = (0.1, 0.22)
    rotation: tuple[float, float] = (0.0, float(np.pi))
    fg_mean: tuple[float, float] = (0.6, 0.8)
    bg_mean: tuple[float, float] = (0.1, 0.25)
    noise: float = 0.03
    gamma: tuple[float, float] = (1.0, 1.0)
    blur: float = 0.7
    texture: str = "none"
    texture_amplitude: tuple[float, float] = (0.0, 0.0)
    texture_scale: tuple[float, float] = (0.08, 0.2)
    texture_angle: tuple[float, float] = (0.0, float(np.pi))
    seed: int = 0

    def __post_init__(self):
        if self.texture not in TEXTURES:
            raise InvalidInput(f"texture must be one of {TEXTURES}, got {self.texture!r}")
        for name in ("center", "axes", "rotation", "fg_mean", "bg_mean", "gamma",
                     "texture_amplitude", "texture_scale", "texture_angle"):
            _range(getattr(self, name), name)
        lo, hi = self.objects
        if not 1 <= lo <= hi:
            raise InvalidInput(f"objects: need 1 <= low <= high, got {self.objects!r}")
        if self.axes[0] <= 0 or self.gamma[0] <= 0:
            raise InvalidInput("ellipse axes and gamma must be positive")
        if min(self.size) < 4:
            raise InvalidInput(f"image size too small: {self.size!r}")
        if self.noise < 0 or self.blur < 0:
            raise InvalidInput("noise and blur must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthDomainSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise InvalidInput(f"unknown domain spec key(s): {sorted(unknown)}")
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        return cls(**kw)


def _ellipse(h, w, rng, spec):
    yy, xx = np.mgrid[0:h, 0:w]
    cy = rng.uniform(*spec.center) * h
    cx = rng.uniform(*spec.center) * w
    a = rng.uniform(*spec.axes) * min(h, w)
    b = rng.uniform(*spec.axes) * min(h, w)
    th = rng.uniform(*spec.rotation)
    dy, dx = yy - cy, xx - cx
    r1 = (dx * np.cos(th) + dy * np.sin(th)) / a
    r2 = (-dx * np.sin(th) + dy * np.cos(th)) / b
    return r1 * r1 + r2 * r2 <= 1.0


def _texture(h, w, rng, spec):
    amp = rng.uniform(*spec.texture_amplitude)
    if spec.texture == "none" or amp == 0.0:
        return np.zeros((h, w))
    period = rng.uniform(*spec.texture_scale) * min(h, w)
    if spec.texture == "stripes":
        th, phase = rng.uniform(*spec.texture_angle), rng.uniform(0, 2 * np.pi)
        yy, xx = np.mgrid[0:h, 0:w]
        return amp * np.sin(2 * np.pi * (xx * np.cos(th) + yy * np.sin(th)) / period + phase)
    field_ = ndimage.gaussian_filter(rng.standard_normal((h, w)), sigma=period / 4, mode="wrap")
    return amp * field_ / (np.abs(field_).max() + 1e-12)


def generate_sample(spec: SynthDomainSpec, index: int) -> tuple[np.ndarray, np.ndarray]:
    """One ``(image (1, H, W) float32, mask (H, W) uint8)`` pair."""
    rng = stream(spec.seed, spec.domain, index)
    h, w = spec.size
    mask = np.zeros((h, w), dtype=bool)
    for _ in range(int(rng.integers(spec.objects[0], spec.objects[1] + 1))):
        mask |= _ellipse(h, w, rng, spec)
    fg = rng.uniform(*spec.fg_mean)
    bg = rng.uniform(*spec.bg_mean)
    gamma = rng.uniform(*spec.gamma)
    # texture has its own stream so its draws never shift the noise
    tex = _texture(h, w, stream(spec.seed, spec.domain, index, 1), spec)
    img = np.where(mask, fg, bg + tex)
    if spec.blur > 0:
        img = ndimage.gaussian_filter(img, spec.blur, mode="nearest")
    img = img + spec.noise * rng.standard_normal((h, w))
    img = np.clip(img, 0.0, 1.0) ** gamma
    return img[None].astype(np.float32), mask.astype(np.uint8)


def generate_domain(spec: SynthDomainSpec, n: int, offset: int = 0) -> Dataset:
    """``n`` samples with indices ``offset .. offset + n - 1``."""
    if n < 1:
        raise InvalidInput(f"n must be >= 1, got {n}")
    pairs = [generate_sample(spec, offset + i) for i in range(n)]
    return Dataset(
        images=[p[0] for p in pairs],
        masks=[p[1] for p in pairs],
        domain=f"synthetic-{spec.domain}",
    )
