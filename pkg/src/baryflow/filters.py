"""Weight-image manipulation filters: hue, saturation, blur, dither.

Hue and saturation operate in HSV; gray pixels (zero saturation) are
unaffected by hue rotation. All filters are pure functions of the input
image. Floyd-Steinberg is a strictly sequential raster-order scan so its
output never depends on execution schedule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from matplotlib.colors import hsv_to_rgb, rgb_to_hsv
from scipy.ndimage import convolve1d

from .image import Image

__all__ = ["DitherSpec", "hue_shift", "saturate", "gaussian_blur", "dither"]

DITHER_METHODS = ("floyd-steinberg", "ordered-bayer-8x8")


@dataclass(frozen=True)
class DitherSpec:
    """Quantization recipe: method and number of levels per channel."""

    method: str = "floyd-steinberg"
    levels: int = 2

    def __post_init__(self):
        if self.method not in DITHER_METHODS:
            raise ValueError(f"unknown dither method {self.method!r}")
        if self.levels < 2:
            raise ValueError(f"levels must be >= 2, got {self.levels}")


def hue_shift(image: Image, degrees: float) -> Image:
    """Rotate every pixel's HSV hue by ``degrees`` (modulo 360).

    Saturation and value are preserved; gray pixels pass through unchanged.
    """
    if not np.isfinite(degrees):
        raise ValueError("degrees must be finite")
    hsv = rgb_to_hsv(image.data)
    hsv[..., 0] = np.mod(hsv[..., 0] + degrees / 360.0, 1.0)
    return Image(hsv_to_rgb(hsv)).assert_finite()


def saturate(image: Image, factor: float) -> Image:
    """Scale HSV saturation by ``factor`` (clamped to [0, 1]); hue and value kept."""
    if not (factor >= 0.0):
        raise ValueError(f"saturation factor must be >= 0, got {factor}")
    hsv = rgb_to_hsv(image.data)
    hsv[..., 1] = np.clip(hsv[..., 1] * factor, 0.0, 1.0)
    return Image(hsv_to_rgb(hsv)).assert_finite()


def _gaussian_kernel(sigma: float) -> np.ndarray:
    radius = int(np.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def gaussian_blur(image: Image, sigma: float) -> Image:
    """Separable gaussian blur, kernel radius ceil(3*sigma), clamp-to-edge."""
    if not (sigma > 0.0):
        raise ValueError(f"sigma must be > 0, got {sigma}")
    kernel = _gaussian_kernel(sigma)
    out = convolve1d(image.data, kernel, axis=0, mode="nearest")
    out = convolve1d(out, kernel, axis=1, mode="nearest")
    return Image(out).assert_finite()


# 8x8 Bayer index matrix, built from the 2x2 base by the usual recursion.
def _bayer8() -> np.ndarray:
    m = np.zeros((1, 1))
    while m.shape[0] < 8:
        m = np.block([[4 * m, 4 * m + 2], [4 * m + 3, 4 * m + 1]])
    return m


_BAYER8_THRESH = (_bayer8() + 0.5) / 64.0


def _dither_ordered(data: np.ndarray, levels: int) -> np.ndarray:
    h, w, _ = data.shape
    tile = np.tile(
        _BAYER8_THRESH,
        ((h + 7) // 8, (w + 7) // 8),
    )[:h, :w, None]
    idx = np.floor(data * (levels - 1) + tile)
    return np.clip(idx, 0, levels - 1) / (levels - 1)


def _dither_floyd_steinberg(data: np.ndarray, levels: int) -> np.ndarray:
    h, w, _ = data.shape
    steps = levels - 1
    out = np.empty_like(data)
    for c in range(3):
        # Plain Python floats keep the inherently serial scan fast enough.
        rows = data[:, :, c].tolist()
        result = [[0.0] * w for _ in range(h)]
        for y in range(h):
            row = rows[y]
            below = rows[y + 1] if y + 1 < h else None
            res_row = result[y]
            for x in range(w):
                old = row[x]
                q = round(old * steps)
                q = 0 if q < 0 else (steps if q > steps else q)
                new = q / steps
                res_row[x] = new
                err = old - new
                if x + 1 < w:
                    row[x + 1] += err * (7.0 / 16.0)
                if below is not None:
                    if x > 0:
                        below[x - 1] += err * (3.0 / 16.0)
                    below[x] += err * (5.0 / 16.0)
                    if x + 1 < w:
                        below[x + 1] += err * (1.0 / 16.0)
        out[:, :, c] = result
    return out


def dither(image: Image, spec: DitherSpec) -> Image:
    """Quantize each channel to ``spec.levels`` values, {k/(levels-1)}.

    Floyd-Steinberg diffuses the quantization error in raster order and
    preserves per-channel means; ordered Bayer trades that for a fixed
    screen-door pattern.
    """
    if spec.method == "ordered-bayer-8x8":
        out = _dither_ordered(image.data, spec.levels)
    else:
        out = _dither_floyd_steinberg(image.data, spec.levels)
    return Image(out).assert_finite()
