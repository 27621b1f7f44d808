"""Grayscale image carrier: I/O, value-range bookkeeping, crops, bicubic resampling.

All pixel data is held as float64 internally. Every image carries an explicit
value range (``[0,1]``, ``[-1,1]`` or ``[0,255]``) because network inputs live
in ``[-1,1]`` while the quality metrics are defined on the 255 gray-level scale.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage


class UnsupportedImageError(ValueError):
    """Raised for color inputs or image formats outside 8/16-bit grayscale PNG/PGM."""


class Range(enum.Enum):
    """Declared pixel value range of an :class:`Image`."""

    UNIT01 = (0.0, 1.0)
    SIGNED11 = (-1.0, 1.0)
    BYTE255 = (0.0, 255.0)

    @property
    def lo(self) -> float:
        return self.value[0]

    @property
    def hi(self) -> float:
        return self.value[1]


VALID_SCALES = (2, 4, 8)


def check_scale(r: int) -> int:
    """Validate an integer upscaling factor (power of two: 2, 4 or 8)."""
    if r not in VALID_SCALES:
        raise ValueError(f"scale factor must be one of {VALID_SCALES}, got {r!r}")
    return r


ScaleFactor = int  # constrained via check_scale()


@dataclass(frozen=True)
class Image:
    """Immutable 2D grayscale raster with an explicit value range.

    ``data`` is a (H, W) float64 array; the single channel is implicit.
    """

    data: np.ndarray
    range: Range = Range.BYTE255

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"image data must be 2D (H, W), got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image dimensions must be >= 1, got {arr.shape}")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        lo, hi = self.range.lo, self.range.hi
        if arr.min() < lo or arr.max() > hi:
            raise ValueError(
                f"pixel values [{arr.min():g}, {arr.max():g}] outside "
                f"declared range [{lo:g}, {hi:g}]"
            )

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return 1


def load_image(path) -> Image:
    """Load an 8/16-bit grayscale PNG or binary PGM as a BYTE255 image.

    16-bit inputs are rescaled linearly so the format maximum maps to 255.0.
    Color inputs are rejected with :class:`UnsupportedImageError`.
    """
    path = Path(path)
    if path.suffix.lower() in (".pgm", ".ppm", ".pnm"):
        return _load_pgm(path)
    with PILImage.open(path) as im:
        if im.mode == "L":
            arr = np.asarray(im, dtype=np.float64)
        elif im.mode in ("I", "I;16", "I;16B", "I;16L"):
            arr = np.asarray(im, dtype=np.float64) * (255.0 / 65535.0)
        else:
            raise UnsupportedImageError(
                f"{path}: unsupported color type {im.mode!r}; "
                "only 8/16-bit grayscale is accepted"
            )
    return Image(np.clip(arr, 0.0, 255.0), Range.BYTE255)


def _load_pgm(path: Path) -> Image:
    raw = path.read_bytes()
    if raw[:2] == b"P6" or raw[:2] == b"P3":
        raise UnsupportedImageError(f"{path}: PPM color images are not supported")
    if raw[:2] != b"P5":
        raise UnsupportedImageError(f"{path}: not a binary PGM (P5) file")
    # Header: magic, width, height, maxval; '#' comments allowed between tokens.
    pos, fields = 2, []
    while len(fields) < 3:
        m = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\d+)").match(raw, pos)
        if m is None:
            raise UnsupportedImageError(f"{path}: malformed PGM header")
        fields.append(int(m.group(1)))
        pos = m.end()
    width, height, maxval = fields
    pos += 1  # single whitespace byte after maxval
    if not (0 < maxval < 65536):
        raise UnsupportedImageError(f"{path}: invalid PGM maxval {maxval}")
    count = width * height
    if maxval < 256:
        samples = np.frombuffer(raw, dtype=np.uint8, count=count, offset=pos)
        arr = samples.reshape(height, width).astype(np.float64)
    else:
        samples = np.frombuffer(raw, dtype=">u2", count=count, offset=pos)
        arr = samples.reshape(height, width).astype(np.float64) * (255.0 / maxval)
    return Image(np.clip(arr, 0.0, 255.0), Range.BYTE255)


def save_image(img: Image, path) -> None:
    """Write an 8-bit grayscale PNG, clamping to [0, 255] and rounding half-to-even."""
    path = Path(path)
    arr = rescale_range(img, Range.BYTE255).data
    quantized = np.rint(np.clip(arr, 0.0, 255.0)).astype(np.uint8)
    PILImage.fromarray(quantized, mode="L").save(path, format="PNG")


def rescale_range(img: Image, target: Range) -> Image:
    """Affine-map pixel values into ``target``; exact on the range endpoints."""
    if img.range is target:
        return img
    lo_s, hi_s = img.range.lo, img.range.hi
    lo_t, hi_t = target.lo, target.hi
    scaled = (img.data - lo_s) * ((hi_t - lo_t) / (hi_s - lo_s)) + lo_t
    return Image(np.clip(scaled, lo_t, hi_t), target)


def random_crop(img: Image, size: int, seed: int) -> Image:
    """Seeded uniform ``size``x``size`` crop.

    Images with min(W, H) < size are first bicubically resized so the short
    side equals ``size``, then cropped. Same seed, same crop.
    """
    if size <= 0:
        raise ValueError(f"crop size must be positive, got {size}")
    if min(img.width, img.height) < size:
        s = size / min(img.width, img.height)
        new_w = max(size, int(round(img.width * s)))
        new_h = max(size, int(round(img.height * s)))
        img = bicubic_resize(img, new_w, new_h)
    rng = np.random.default_rng(seed)
    x0 = int(rng.integers(0, img.width - size + 1))
    y0 = int(rng.integers(0, img.height - size + 1))
    return Image(img.data[y0 : y0 + size, x0 : x0 + size], img.range)


def center_crop_to_multiple(img: Image, r: int) -> Image:
    """Center-crop so both dimensions are multiples of ``r`` (dims must be >= r)."""
    new_w = (img.width // r) * r
    new_h = (img.height // r) * r
    if new_w < 1 or new_h < 1:
        raise ValueError(f"image {img.width}x{img.height} smaller than factor {r}")
    x0 = (img.width - new_w) // 2
    y0 = (img.height - new_h) // 2
    return Image(img.data[y0 : y0 + new_h, x0 : x0 + new_w], img.range)


# Keys bicubic convolution kernel, a = -0.5.
def _keys_kernel(x: np.ndarray) -> np.ndarray:
    ax = np.abs(x)
    out = np.zeros_like(ax)
    near = ax <= 1.0
    far = (ax > 1.0) & (ax < 2.0)
    out[near] = (1.5 * ax[near] - 2.5) * ax[near] * ax[near] + 1.0
    out[far] = ((-0.5 * ax[far] + 2.5) * ax[far] - 4.0) * ax[far] + 2.0
    return out


def _resample_taps(n_in: int, n_out: int):
    """Tap indices and normalized weights for one axis of a separable resize.

    Downscaling stretches the kernel support by the inverse scale so the
    resample prefilters (anti-aliases); weights are renormalized to sum to 1
    and source indices are clamped at the edges.
    """
    scale = n_out / n_in
    kscale = min(scale, 1.0)
    support = 2.0 / kscale
    centers = (np.arange(n_out) + 0.5) / scale - 0.5
    left = np.floor(centers - support).astype(np.int64) + 1
    n_taps = 2 * int(np.ceil(support)) + 1
    idx = left[:, None] + np.arange(n_taps)[None, :]
    weights = _keys_kernel((centers[:, None] - idx) * kscale)
    weights /= weights.sum(axis=1, keepdims=True)
    np.clip(idx, 0, n_in - 1, out=idx)
    return idx, weights


def _resample_rows(data: np.ndarray, n_out: int) -> np.ndarray:
    idx, w = _resample_taps(data.shape[0], n_out)
    return np.einsum("ot,otw->ow", w, data[idx, :])


def bicubic_resize(img: Image, out_w: int, out_h: int) -> Image:
    """Separable Keys (a = -0.5) bicubic resize with clamped edges.

    Output values are clamped back into the input's declared range.
    """
    if out_w < 1 or out_h < 1:
        raise ValueError(f"output dimensions must be >= 1, got {out_w}x{out_h}")
    data = _resample_rows(img.data, out_h)
    data = _resample_rows(data.T, out_w).T
    return Image(np.clip(data, img.range.lo, img.range.hi), img.range)


def resize_by_factor(img: Image, factor: float) -> Image:
    """Resize both dimensions by ``factor``; downscale maps W to floor(W*factor)."""
    out_w = max(1, int(np.floor(img.width * factor + 1e-9)))
    out_h = max(1, int(np.floor(img.height * factor + 1e-9)))
    return bicubic_resize(img, out_w, out_h)
