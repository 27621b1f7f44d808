"""Reference-based image quality metrics (MSE, PSNR, SSIM) and MOS aggregation.

All image metrics compute on the 255 gray-level scale; inputs are converted
if they carry a different declared range. PSNR for identical images is the
explicit ``math.inf`` sentinel, never a floating overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from graysr.image import Image, Range, rescale_range

PEAK = 255.0

# Standard SSIM instantiation: 11x11 Gaussian window, sigma 1.5,
# C1 = (0.01*255)^2, C2 = (0.03*255)^2, C3 = C2/2, combined as l*c*s.
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = (0.01 * PEAK) ** 2
SSIM_C2 = (0.03 * PEAK) ** 2
SSIM_C3 = SSIM_C2 / 2.0


@dataclass(frozen=True)
class MetricReport:
    """Per-image-pair quality numbers."""

    psnr_db: float  # math.inf iff mse == 0
    ssim: float
    mse: float


@dataclass(frozen=True)
class RatingSet:
    """Collected 1-5 opinion scores for one method."""

    scores: tuple

    def __post_init__(self):
        scores = tuple(int(s) for s in self.scores)
        if len(scores) < 1:
            raise ValueError("a rating set needs at least one score")
        for s in scores:
            if not 1 <= s <= 5:
                raise ValueError(f"scores must be integers in 1..5, got {s}")
        object.__setattr__(self, "scores", scores)

    @property
    def n_raters(self) -> int:
        return len(self.scores)


def _paired_byte255(a: Image, b: Image):
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError(
            f"dimension mismatch: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    return rescale_range(a, Range.BYTE255).data, rescale_range(b, Range.BYTE255).data


def mse(a: Image, b: Image) -> float:
    """Mean squared per-pixel difference in squared gray levels."""
    x, y = _paired_byte255(a, b)
    d = x - y
    return float(np.mean(d * d))


def psnr(a: Image, b: Image) -> float:
    """Peak signal-to-noise ratio, 10*log10(255^2 / MSE), in decibels."""
    e = mse(a, b)
    if e == 0.0:
        return math.inf
    return 10.0 * math.log10(PEAK * PEAK / e)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size) - half
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _window_filter(data: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # Separable 'valid' correlation with a normalized 1D window.
    from numpy.lib.stride_tricks import sliding_window_view

    k = kernel.size
    rows = sliding_window_view(data, k, axis=0) @ kernel
    return sliding_window_view(rows, k, axis=1) @ kernel


def ssim(a: Image, b: Image) -> float:
    """Mean structural similarity over all fully-contained 11x11 windows.

    Luminance, contrast and structure terms are combined with unit exponents;
    the result is bounded by [-1, 1].
    """
    x, y = _paired_byte255(a, b)
    if min(x.shape) < SSIM_WINDOW:
        raise ValueError(
            f"image {x.shape[1]}x{x.shape[0]} smaller than the "
            f"{SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )
    w = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    mu_x = _window_filter(x, w)
    mu_y = _window_filter(y, w)
    var_x = np.maximum(_window_filter(x * x, w) - mu_x * mu_x, 0.0)
    var_y = np.maximum(_window_filter(y * y, w) - mu_y * mu_y, 0.0)
    cov = _window_filter(x * y, w) - mu_x * mu_y
    sd_x = np.sqrt(var_x)
    sd_y = np.sqrt(var_y)

    lum = (2.0 * mu_x * mu_y + SSIM_C1) / (mu_x * mu_x + mu_y * mu_y + SSIM_C1)
    con = (2.0 * sd_x * sd_y + SSIM_C2) / (var_x + var_y + SSIM_C2)
    struct = (cov + SSIM_C3) / (sd_x * sd_y + SSIM_C3)
    value = float(np.mean(lum * con * struct))
    return min(1.0, max(-1.0, value))


def compare(a: Image, b: Image) -> MetricReport:
    """All three reference metrics for one image pair."""
    return MetricReport(psnr_db=psnr(a, b), ssim=ssim(a, b), mse=mse(a, b))


def mos(ratings: RatingSet | Sequence[int]) -> float:
    """Mean opinion score: arithmetic mean of 1-5 ratings."""
    if not isinstance(ratings, RatingSet):
        ratings = RatingSet(tuple(ratings))
    return sum(ratings.scores) / ratings.n_raters
