"""StyCona augmentation: style-code blending and content-map mixing.

All randomness flows through ``numpy.random.Generator`` objects derived from
``(seed, *keys)`` with :func:`stream`, so a sample's augmentation depends only
on the master seed and its own index, never on scheduling.
"""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterator, Optional, Sequence, Union

import numpy as np

from .decomposition import StyleContent, as_image, decompose
from .errors import InvalidInput
from .linalg import SvdFactors, reconstruct

Weight = Union[float, tuple[float, float]]

UV_CHOICES = ("coin", "left", "right", "both")
INDEX_MODES = ("shared", "independent")
_MASK64 = (1 << 64) - 1


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``."""
    entropy = [int(seed) & _MASK64, *(int(k) & _MASK64 for k in keys)]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _weight_range(w: Weight, name: str) -> tuple[float, float]:
    lo, hi = (float(w), float(w)) if np.isscalar(w) else (float(w[0]), float(w[1]))
    if not (0.0 <= lo <= hi <= 1.0):
        raise InvalidInput(f"{name} must be a value or range inside [0, 1], got {w!r}")
    return lo, hi


@dataclass(frozen=True)
class AugmentConfig:
    """Knobs for one StyCona augmentation policy.

    ``alpha`` and ``beta`` are either a fixed weight or a ``(low, high)`` range
    sampled uniformly once per augmentation. ``uv_choice`` picks which
    singular vector of a selected pair is mixed: a fair ``"coin"`` per index,
    always ``"left"``/``"right"``, or ``"both"``. ``index_mode="independent"``
    draws a separate index set for the auxiliary image.
    """

    t: int = 16
    alpha: Weight = (0.0, 1.0)
    beta: Weight = (0.0, 1.0)
    apply_prob: float = 0.5
    uv_choice: str = "coin"
    index_mode: str = "shared"
    clamp: bool = True
    seed: int = 0

    def __post_init__(self):
        if int(self.t) != self.t or self.t < 0:
            raise InvalidInput(f"t must be a non-negative integer, got {self.t!r}")
        _weight_range(self.alpha, "alpha")
        _weight_range(self.beta, "beta")
        if not 0.0 <= self.apply_prob <= 1.0:
            raise InvalidInput(f"apply_prob must lie in [0, 1], got {self.apply_prob}")
        if self.uv_choice not in UV_CHOICES:
            raise InvalidInput(f"uv_choice must be one of {UV_CHOICES}, got {self.uv_choice!r}")
        if self.index_mode not in INDEX_MODES:
            raise InvalidInput(f"index_mode must be one of {INDEX_MODES}, got {self.index_mode!r}")


@dataclass
class AugmentRecord:
    index: int
    aux_index: Optional[int]
    applied: bool
    t: int = 0
    alpha: Optional[float] = None
    beta: Optional[float] = None
    indices: list[int] = field(default_factory=list)
    aux_indices: Optional[list[int]] = None
    sides: list[str] = field(default_factory=list)
    source: Optional[str] = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "AugmentRecord":
        return cls(**json.loads(line))


def write_records(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def read_records(path) -> list[AugmentRecord]:
    with open(path, encoding="utf-8") as fh:
        return [AugmentRecord.from_json(line) for line in fh if line.strip()]


def style_blend(sigma_i, sigma_j, alpha: float) -> np.ndarray:
    """Elementwise ``alpha * sigma_i + (1 - alpha) * sigma_j``."""
    si = np.asarray(sigma_i, dtype=np.float64)
    sj = np.asarray(sigma_j, dtype=np.float64)
    if si.shape != sj.shape or si.ndim != 1:
        raise InvalidInput(f"style codes must be equal-length vectors, got {si.shape} and {sj.shape}")
    if not 0.0 <= alpha <= 1.0:
        raise InvalidInput(f"alpha must lie in [0, 1], got {alpha}")
    return alpha * si + (1.0 - alpha) * sj


def content_mix(
    f_i: SvdFactors,
    f_j: SvdFactors,
    indices: Sequence[int],
    beta: float,
    sides: Sequence[str],
    aux_indices: Optional[Sequence[int]] = None,
) -> SvdFactors:
    """Blend selected singular vectors of ``f_i`` toward those of ``f_j``.

    For each position n, column ``indices[n]`` of ``f_i`` is mixed with column
    ``aux_indices[n]`` of ``f_j`` (the same index when ``aux_indices`` is None)
    on the side given by ``sides[n]``: ``"u"``, ``"v"`` or ``"uv"``. Mixed
    vectors are left unnormalized.
    """
    if f_i.u.shape != f_j.u.shape or f_i.v.shape != f_j.v.shape:
        raise InvalidInput(f"factor shapes differ: {f_i.u.shape}/{f_i.v.shape} vs {f_j.u.shape}/{f_j.v.shape}")
    if not 0.0 <= beta <= 1.0:
        raise InvalidInput(f"beta must lie in [0, 1], got {beta}")
    indices = list(indices)
    aux = indices if aux_indices is None else list(aux_indices)
    if len(sides) != len(indices) or len(aux) != len(indices):
        raise InvalidInput("indices, aux_indices and sides must have equal length")
    k = f_i.k
    u, v = f_i.u.copy(), f_i.v.copy()
    for r, s, side in zip(indices, aux, sides):
        if not (0 <= r < k and 0 <= s < k):
            raise InvalidInput(f"index out of range for k={k}: {r}, {s}")
        if side not in ("u", "v", "uv"):
            raise InvalidInput(f"side must be 'u', 'v' or 'uv', got {side!r}")
        if "u" in side:
            u[:, r] = beta * f_i.u[:, r] + (1.0 - beta) * f_j.u[:, s]
        if "v" in side:
            v[:, r] = beta * f_i.v[:, r] + (1.0 - beta) * f_j.v[:, s]
    return SvdFactors(u=u, sigma=f_i.sigma, v=v)


def _draw_sides(rng: np.random.Generator, n: int, uv_choice: str) -> list[str]:
    if uv_choice == "coin":
        return ["u" if b else "v" for b in rng.integers(0, 2, size=n) == 0]
    return [{"left": "u", "right": "v", "both": "uv"}[uv_choice]] * n


def stycona_factors(
    sc_i: StyleContent,
    sc_j: StyleContent,
    cfg: AugmentConfig,
    rng: np.random.Generator,
    *,
    index: int = 0,
    aux_index: int = 1,
    clamp: Optional[bool] = None,
) -> tuple[np.ndarray, AugmentRecord]:
    """Augment an already decomposed image; see :func:`stycona`."""
    if (sc_i.channels, sc_i.height, sc_i.width) != (sc_j.channels, sc_j.height, sc_j.width):
        raise InvalidInput("images to mix must share channels, height and width")
    if index == aux_index:
        raise InvalidInput("auxiliary image must differ from the augmented one")
    k = sc_i.k
    t = int(cfg.t)
    if t > k:
        warnings.warn(f"t={t} exceeds min(height, width)={k}; using t={k}", stacklevel=2)
        t = k

    alpha = float(rng.uniform(*_weight_range(cfg.alpha, "alpha")))
    beta = float(rng.uniform(*_weight_range(cfg.beta, "beta")))
    chosen = np.sort(rng.choice(k, size=t, replace=False)).tolist()
    aux_chosen = None
    if cfg.index_mode == "independent":
        aux_chosen = np.sort(rng.choice(k, size=t, replace=False)).tolist()
    sides = _draw_sides(rng, t, cfg.uv_choice)

    channels = []
    for fi, fj in zip(sc_i.factors, sc_j.factors):
        sigma = style_blend(fi.sigma, fj.sigma, alpha)
        mixed = content_mix(fi, fj, chosen, beta, sides, aux_chosen)
        channels.append(reconstruct(SvdFactors(u=mixed.u, sigma=sigma, v=mixed.v)))
    out = np.stack(channels)
    if cfg.clamp if clamp is None else clamp:
        out = np.clip(out, 0.0, 1.0)
    record = AugmentRecord(
        index=index,
        aux_index=aux_index,
        applied=True,
        t=t,
        alpha=alpha,
        beta=beta,
        indices=chosen,
        aux_indices=aux_chosen,
        sides=sides,
    )
    return out.astype(np.float32), record


def stycona(
    x_i,
    x_j,
    cfg: AugmentConfig,
    rng: np.random.Generator,
    *,
    index: int = 0,
    aux_index: int = 1,
    clamp: Optional[bool] = None,
) -> tuple[np.ndarray, AugmentRecord]:
    """Augment ``x_i`` using ``x_j`` as the auxiliary image.

    One alpha, one beta, one index set and one list of side flags are drawn
    and shared by every channel. ``clamp`` overrides ``cfg.clamp``.
    """
    a, b = as_image(x_i, check_range=False), as_image(x_j, check_range=False)
    if a.shape != b.shape:
        raise InvalidInput(f"shape mismatch: {a.shape} vs {b.shape}")
    return stycona_factors(decompose(a), decompose(b), cfg, rng, index=index, aux_index=aux_index, clamp=clamp)


class _DecompositionCache:
    def __init__(self, images, decompositions=None):
        self.images = images
        self.cache = dict(enumerate(decompositions)) if decompositions is not None else {}

    def __getitem__(self, i: int) -> StyleContent:
        # concurrent misses may factorize twice; both results are identical
        sc = self.cache.get(i)
        if sc is None:
            sc = self.cache[i] = decompose(self.images[i])
        return sc


def augment_sample(
    images: Sequence[np.ndarray],
    i: int,
    cfg: AugmentConfig,
    rng: np.random.Generator,
    decompositions=None,
) -> tuple[np.ndarray, AugmentRecord]:
    """Apply the batch policy to sample ``i``: maybe pick ``j != i`` and augment."""
    n = len(images)
    if n < 2:
        raise InvalidInput("augmentation needs a dataset of at least 2 images")
    if rng.random() >= cfg.apply_prob:
        return as_image(images[i], check_range=False), AugmentRecord(index=i, aux_index=None, applied=False)
    j = int(rng.integers(n - 1))
    j += j >= i
    get = decompositions if decompositions is not None else _DecompositionCache(images)
    return stycona_factors(get[i], get[j], cfg, rng, index=i, aux_index=j)


def augment_batch(
    images: Sequence[np.ndarray],
    cfg: AugmentConfig,
    *,
    workers: int = 1,
    epoch: Optional[int] = None,
    decompositions: Optional[Sequence[StyleContent]] = None,
) -> Iterator[tuple[np.ndarray, AugmentRecord]]:
    """Yield ``(image, record)`` for every sample, in dataset order.

    Sample i draws from ``stream(cfg.seed, i)`` (or ``stream(cfg.seed, epoch,
    i)``), so output does not depend on ``workers``.
    """
    n = len(images)
    if n < 2:
        raise InvalidInput("augmentation needs a dataset of at least 2 images")
    shapes = {np.shape(x) for x in images}
    if len(shapes) != 1:
        raise InvalidInput(f"images have heterogeneous shapes {sorted(shapes)}; resize upstream")
    cache = _DecompositionCache(images, decompositions)
    keys = () if epoch is None else (epoch,)

    def task(i: int):
        return augment_sample(images, i, cfg, stream(cfg.seed, *keys, i), cache)

    if workers <= 1:
        yield from map(task, range(n))
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(task, range(n))
