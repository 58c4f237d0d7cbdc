"""Segmentation metrics and domain-shift proxies.

DSC is reported in percent, ASD in pixels. A metric that is undefined for a
class (see :func:`dsc` and :func:`asd`) is returned as ``None``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from .decomposition import as_image, decompose
from .errors import InvalidInput


def _pair(pred, gt) -> tuple[np.ndarray, np.ndarray]:
    p, g = np.asarray(pred), np.asarray(gt)
    if p.shape != g.shape:
        raise InvalidInput(f"mask shapes differ: {p.shape} vs {g.shape}")
    if p.ndim != 2:
        raise InvalidInput(f"masks must be 2-D, got shape {p.shape}")
    return p, g


def dsc(pred, gt, c: int = 1) -> Optional[float]:
    """Dice overlap of class ``c`` in percent; ``None`` if absent from both."""
    p, g = _pair(pred, gt)
    p, g = p == c, g == c
    total = int(p.sum()) + int(g.sum())
    if total == 0:
        return None
    return 100.0 * 2.0 * int(np.logical_and(p, g).sum()) / total


def boundary(mask: np.ndarray) -> np.ndarray:
    """Foreground pixels with a background 4-neighbour or on the image edge."""
    m = np.asarray(mask, dtype=bool)
    inner = np.zeros_like(m)
    inner[1:-1, 1:-1] = m[:-2, 1:-1] & m[2:, 1:-1] & m[1:-1, :-2] & m[1:-1, 2:]
    return m & ~inner


# below this many boundary-pixel pairs, direct distances beat two transforms
_PAIRWISE_LIMIT = 4096


def _directed_mean(src: np.ndarray, dst: np.ndarray) -> float:
    # distance from every src boundary pixel to the nearest dst boundary pixel
    dist = ndimage.distance_transform_edt(~dst)
    return float(dist[src].mean())


def asd(pred, gt, c: int = 1) -> Optional[float]:
    """Average surface distance for class ``c``, in pixels.

    The mean of the two directed mean nearest-boundary distances. ``None``
    unless both masks contain class ``c``.
    """
    p, g = _pair(pred, gt)
    p, g = p == c, g == c
    if not p.any() or not g.any():
        return None
    bp, bg = boundary(p), boundary(g)
    np_, ng = int(bp.sum()), int(bg.sum())
    if np_ * ng <= _PAIRWISE_LIMIT:
        a, b = np.argwhere(bp), np.argwhere(bg)
        d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))
        return 0.5 * (float(d.min(axis=1).mean()) + float(d.min(axis=0).mean()))
    return 0.5 * (_directed_mean(bp, bg) + _directed_mean(bg, bp))


def histogram_distance(a, b, bins: int = 64) -> float:
    """L1 distance between normalized intensity histograms, averaged over channels."""
    xa, xb = as_image(a, check_range=False), as_image(b, check_range=False)
    if xa.shape[0] != xb.shape[0]:
        raise InvalidInput(f"channel counts differ: {xa.shape[0]} vs {xb.shape[0]}")
    total = 0.0
    for ca, cb in zip(xa, xb):
        ha, _ = np.histogram(np.clip(ca, 0, 1), bins=bins, range=(0.0, 1.0))
        hb, _ = np.histogram(np.clip(cb, 0, 1), bins=bins, range=(0.0, 1.0))
        total += float(np.abs(ha / ha.sum() - hb / hb.sum()).sum())
    return total / xa.shape[0]


def style_shift(a, b) -> float:
    """Euclidean distance between concatenated per-channel style codes."""
    xa, xb = as_image(a, check_range=False), as_image(b, check_range=False)
    if xa.shape != xb.shape:
        raise InvalidInput(f"shape mismatch: {xa.shape} vs {xb.shape}")
    sa = decompose(xa).style_codes().ravel()
    sb = decompose(xb).style_codes().ravel()
    return float(np.linalg.norm(sa - sb))


def _mean(values) -> Optional[float]:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


@dataclass
class MetricReport:
    dsc: dict[int, Optional[float]] = field(default_factory=dict)
    asd: dict[int, Optional[float]] = field(default_factory=dict)
    mean_dsc: Optional[float] = None
    mean_asd: Optional[float] = None
    histogram_distance: Optional[float] = None
    style_shift: Optional[float] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dsc"] = {str(k): v for k, v in self.dsc.items()}
        d["asd"] = {str(k): v for k, v in self.asd.items()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def segmentation_report(pred, gt, num_classes: int, *, ignore_background: bool = True) -> MetricReport:
    """Per-class DSC/ASD for one prediction; means skip undefined classes."""
    classes = range(1 if ignore_background else 0, num_classes)
    rep = MetricReport()
    for c in classes:
        rep.dsc[c] = dsc(pred, gt, c)
        rep.asd[c] = asd(pred, gt, c)
    rep.mean_dsc = _mean(rep.dsc.values())
    rep.mean_asd = _mean(rep.asd.values())
    return rep


def aggregate_reports(reports) -> MetricReport:
    """Average per-class values over many reports, skipping undefined entries."""
    reports = list(reports)
    out = MetricReport()
    classes = sorted({c for r in reports for c in r.dsc})
    for c in classes:
        out.dsc[c] = _mean(r.dsc.get(c) for r in reports)
        out.asd[c] = _mean(r.asd.get(c) for r in reports)
    out.mean_dsc = _mean(out.dsc.values())
    out.mean_asd = _mean(out.asd.values())
    return out


def format_value(v: Optional[float], places: int = 2) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "undefined"
    return f"{v:.{places}f}"
