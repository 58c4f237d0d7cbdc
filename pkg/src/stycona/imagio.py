"""Reading and writing images, label masks and STYC tensors.

Supported image formats are PNG (8/16-bit grayscale, 8-bit RGB, through
Pillow) and binary PGM (P5, 8 or 16 bit). Integer pixels map to ``[0, 1]``
by ``v / (2**bits - 1)``.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from .decomposition import as_image
from .errors import FormatError, ImageIOError, InvalidInput

IMAGE_SUFFIXES = (".png", ".pgm")
DEFAULT_SIZE = (256, 256)

STYC_MAGIC = b"STYC"
STYC_VERSION = 1
# dtype code 1 (float64) extends the format for lossless model parameters
STYC_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def _suffix(path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix not in IMAGE_SUFFIXES:
        raise ImageIOError(f"unsupported image format {suffix!r} for {path}")
    return suffix


# -- PGM ---------------------------------------------------------------------

def _pgm_tokens(data: bytes, count: int) -> tuple[list[int], int]:
    tokens, pos = [], 2
    while len(tokens) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos : pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise FormatError("malformed PGM header")
        tokens.append(int(data[start:pos]))
    # exactly one whitespace byte separates the header from the raster
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise FormatError("malformed PGM header")
    return tokens, pos + 1


def _read_pgm(data: bytes) -> tuple[np.ndarray, int]:
    if data[:2] != b"P5":
        raise FormatError("not a binary PGM (P5) file")
    (width, height, maxval), start = _pgm_tokens(data, 3)
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise FormatError(f"invalid PGM header values {width}x{height} maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    size = width * height * dtype.itemsize
    if len(data) - start < size:
        raise FormatError("truncated PGM raster")
    raw = np.frombuffer(data, dtype=dtype, count=width * height, offset=start).reshape(height, width)
    bits = 16 if maxval > 255 else 8
    if maxval != (1 << bits) - 1:
        # rescale non-standard maxval onto the full range of the container
        raw = np.round(raw.astype(np.float64) * ((1 << bits) - 1) / maxval)
    return raw.astype(np.uint16 if bits == 16 else np.uint8), bits


def _write_pgm(path, raw: np.ndarray, bits: int) -> None:
    height, width = raw.shape
    header = f"P5\n{width} {height}\n{(1 << bits) - 1}\n".encode("ascii")
    body = raw.astype(">u2" if bits == 16 else "u1").tobytes()
    with open(path, "wb") as fh:
        fh.write(header + body)


# -- raw integer rasters -------------------------------------------------------

def read_raw(path) -> tuple[np.ndarray, int]:
    """Integer raster of shape ``(channels, H, W)`` and its bit depth."""
    suffix = _suffix(path)
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ImageIOError(f"cannot read {path}: {exc}") from exc
    if suffix == ".pgm":
        raw, bits = _read_pgm(data)
        return raw[None], bits
    try:
        with PILImage.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("I;16", "I;16B", "I;16L", "I"):
                arr = np.asarray(im, dtype=np.int64)
                if arr.min() < 0 or arr.max() > 65535:
                    raise FormatError(f"{path}: pixel values outside 16-bit range")
                return arr.astype(np.uint16)[None], 16
            if mode == "1":
                im = im.convert("L")
            elif mode == "LA":
                im = im.convert("L")
            elif mode in ("P", "PA", "RGBA", "CMYK", "YCbCr"):
                im = im.convert("RGB")
            arr = np.asarray(im)
    except (UnidentifiedImageError, SyntaxError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise FormatError(f"{path}: corrupt image data ({exc})") from exc
    if arr.dtype != np.uint8:
        raise FormatError(f"{path}: unsupported pixel type {arr.dtype}")
    if arr.ndim == 2:
        return arr[None], 8
    return np.moveaxis(arr, -1, 0), 8


def write_raw(path, raw: np.ndarray, bits: int) -> None:
    suffix = _suffix(path)
    channels = raw.shape[0]
    try:
        if suffix == ".pgm":
            if channels != 1:
                raise InvalidInput("PGM output needs a single-channel image")
            _write_pgm(path, raw[0], bits)
        elif channels == 1:
            if bits == 16:
                im = PILImage.fromarray(raw[0].astype(np.uint16))
            else:
                im = PILImage.fromarray(raw[0].astype(np.uint8), mode="L")
            im.save(path, format="PNG")
        elif channels == 3 and bits == 8:
            PILImage.fromarray(np.moveaxis(raw, 0, -1).astype(np.uint8), mode="RGB").save(path, format="PNG")
        else:
            raise InvalidInput(f"cannot write {channels}-channel {bits}-bit PNG")
    except OSError as exc:
        raise ImageIOError(f"cannot write {path}: {exc}") from exc


# -- resampling ------------------------------------------------------------------

def _axis_coords(n_in: int, n_out: int) -> np.ndarray:
    if n_out == 1 or n_in == 1:
        return np.zeros(n_out)
    return np.arange(n_out) * ((n_in - 1) / (n_out - 1))


def resize_bilinear(img: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Corner-aligned bilinear resampling of a ``(C, H, W)`` array."""
    img = np.asarray(img)
    h, w = img.shape[-2:]
    th, tw = size
    if (h, w) == (th, tw):
        return img.copy()
    ys, xs = _axis_coords(h, th), _axis_coords(w, tw)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    a = img.astype(np.float64)
    top = a[..., y0, :][..., x0] * (1 - wx) + a[..., y0, :][..., x1] * wx
    bot = a[..., y1, :][..., x0] * (1 - wx) + a[..., y1, :][..., x1] * wx
    return (top * (1 - wy) + bot * wy).astype(img.dtype if img.dtype.kind == "f" else np.float64)


def resize_nearest(mask: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Corner-aligned nearest-neighbour resampling for label maps."""
    h, w = mask.shape[-2:]
    ys = np.floor(_axis_coords(h, size[0]) + 0.5).astype(int)
    xs = np.floor(_axis_coords(w, size[1]) + 0.5).astype(int)
    return mask[..., ys, :][..., xs]


# -- images ---------------------------------------------------------------------

def normalize(raw: np.ndarray, bits: int) -> np.ndarray:
    return (raw.astype(np.float64) / ((1 << bits) - 1)).astype(np.float32)


def quantize(img: np.ndarray, bits: int = 8) -> np.ndarray:
    """Clamp to [0, 1] and round half up onto ``bits``-bit integers."""
    scale = (1 << bits) - 1
    q = np.floor(np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) * scale + 0.5)
    return q.astype(np.uint16 if bits == 16 else np.uint8)


def load_image(path, target_size: Optional[tuple[int, int]] = None) -> np.ndarray:
    """Load an image as a ``(C, H, W)`` float32 array in ``[0, 1]``.

    When ``target_size`` is given the image is bilinearly resized to it.
    """
    raw, bits = read_raw(path)
    img = normalize(raw, bits)
    if target_size is not None:
        img = np.clip(resize_bilinear(img, tuple(target_size)), 0.0, 1.0).astype(np.float32)
    return img


def save_image(img, path, bits: int = 8) -> None:
    if bits not in (8, 16):
        raise InvalidInput(f"bits must be 8 or 16, got {bits}")
    x = as_image(img, check_range=False)
    write_raw(path, quantize(x, bits), bits)


# -- masks ----------------------------------------------------------------------

def load_mask(path, num_classes: Optional[int] = None, target_size: Optional[tuple[int, int]] = None) -> np.ndarray:
    """Load a single-channel 8-bit label map of raw class indices."""
    raw, bits = read_raw(path)
    if raw.shape[0] != 1 or bits != 8:
        raise FormatError(f"{path}: masks must be single-channel 8-bit")
    mask = raw[0]
    if num_classes is not None and mask.max(initial=0) >= num_classes:
        raise FormatError(f"{path}: label {int(mask.max())} outside [0, {num_classes})")
    if target_size is not None:
        mask = resize_nearest(mask, tuple(target_size))
    return mask.astype(np.uint8)


def save_mask(mask, path, num_classes: Optional[int] = None) -> None:
    m = np.asarray(mask)
    if m.ndim != 2:
        raise FormatError(f"mask must be 2-D, got shape {m.shape}")
    if m.dtype.kind == "f":
        if not np.all(np.isfinite(m)) or not np.all(m == np.round(m)):
            raise FormatError("mask labels must be integers")
    elif m.dtype.kind not in "iub":
        raise FormatError(f"unsupported mask dtype {m.dtype}")
    upper = 256 if num_classes is None else num_classes
    if m.size and (m.min() < 0 or m.max() >= upper):
        raise FormatError(f"mask labels must lie in [0, {upper})")
    write_raw(path, m.astype(np.uint8)[None], 8)


# -- STYC tensors ---------------------------------------------------------------

def save_tensor(array, path, dtype: str = "float32") -> None:
    """Write ``array`` in the STYC binary format (little-endian, row-major)."""
    code = {"float32": 0, "float64": 1}.get(dtype)
    if code is None:
        raise InvalidInput(f"unsupported tensor dtype {dtype!r}")
    a = np.asarray(array)
    if a.ndim < 1 or a.ndim > 255 or 0 in a.shape:
        raise FormatError(f"tensor must have 1..255 non-zero dims, got {a.shape}")
    if max(a.shape) >= 1 << 32:
        raise FormatError("tensor dims must fit in u32")
    header = STYC_MAGIC + struct.pack("<IBB", STYC_VERSION, code, a.ndim)
    header += struct.pack(f"<{a.ndim}I", *a.shape)
    payload = np.ascontiguousarray(a, dtype=STYC_DTYPES[code]).tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(header + payload)
    except OSError as exc:
        raise ImageIOError(f"cannot write {path}: {exc}") from exc


def decode_tensor(data: bytes) -> np.ndarray:
    if len(data) < 10 or data[:4] != STYC_MAGIC:
        raise FormatError("bad STYC magic")
    version, code, ndim = struct.unpack_from("<IBB", data, 4)
    if version != STYC_VERSION:
        raise FormatError(f"unsupported STYC version {version}")
    if code not in STYC_DTYPES:
        raise FormatError(f"unknown STYC dtype code {code}")
    if ndim < 1:
        raise FormatError("STYC tensor must have at least one dim")
    off = 10 + 4 * ndim
    if len(data) < off:
        raise FormatError("truncated STYC header")
    dims = struct.unpack_from(f"<{ndim}I", data, 10)
    if 0 in dims:
        raise FormatError(f"zero-sized STYC dims {dims}")
    dtype = STYC_DTYPES[code]
    count = int(np.prod(dims, dtype=np.int64))
    if len(data) - off != count * dtype.itemsize:
        raise FormatError(f"STYC payload is {len(data) - off} bytes, expected {count * dtype.itemsize}")
    return np.frombuffer(data, dtype=dtype, offset=off).reshape(dims).astype(dtype.newbyteorder("="))


def load_tensor(path) -> np.ndarray:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ImageIOError(f"cannot read {path}: {exc}") from exc
    return decode_tensor(data)


# -- datasets -------------------------------------------------------------------

@dataclass
class Dataset:
    """In-memory image/mask collection with shared dimensions."""

    images: list[np.ndarray]
    masks: list[Optional[np.ndarray]] = field(default_factory=list)
    domain: str = ""
    paths: list[tuple[str, Optional[str]]] = field(default_factory=list)

    def __post_init__(self):
        if not self.masks:
            self.masks = [None] * len(self.images)
        if len(self.masks) != len(self.images):
            raise InvalidInput("images and masks differ in length")
        shapes = {im.shape for im in self.images}
        if len(shapes) > 1:
            raise InvalidInput(f"dataset images have heterogeneous shapes {sorted(shapes)}")
        for im, m in zip(self.images, self.masks):
            if m is not None and m.shape != im.shape[1:]:
                raise InvalidInput(f"mask shape {m.shape} does not match image {im.shape}")

    def __len__(self) -> int:
        return len(self.images)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.images[0].shape if self.images else ()


def mask_path_for(image_path) -> Path:
    p = Path(image_path)
    return p.with_name(f"{p.stem}_mask{p.suffix}")


def is_mask_path(path) -> bool:
    return Path(path).stem.endswith("_mask")


def scan_images(root) -> list[Path]:
    """Image files under ``root`` (recursive, sorted), excluding ``*_mask`` files."""
    root = Path(root)
    if not root.is_dir():
        raise ImageIOError(f"not a directory: {root}")
    found = []
    for dirpath, _, files in os.walk(root):
        for name in files:
            p = Path(dirpath) / name
            if p.suffix.lower() in IMAGE_SUFFIXES and not is_mask_path(p):
                found.append(p)
    return sorted(found)


def load_dataset(root, target_size: Optional[tuple[int, int]] = DEFAULT_SIZE, domain: str = "",
                 num_classes: Optional[int] = None) -> Dataset:
    """Load every image under ``root`` plus its ``<stem>_mask`` sibling when present."""
    images, masks, paths = [], [], []
    for p in scan_images(root):
        img = load_image(p, target_size)
        mp = mask_path_for(p)
        mask = None
        if mp.exists():
            mask = load_mask(mp, num_classes, target_size=img.shape[1:])
        images.append(img)
        masks.append(mask)
        paths.append((str(p), str(mp) if mask is not None else None))
    return Dataset(images=images, masks=masks, domain=domain, paths=paths)
