"""Linear-light float images and PNG I/O.

All pipeline math happens on linear-light RGB float64 arrays in [0, 1].
PNG files are decoded/encoded through the standard sRGB transfer curve
(IEC 61966-2-1); gamma-encoded bytes never leak into the pipeline.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import cv2
import numpy as np

from .errors import FormatError, InputIOError

__all__ = [
    "Image",
    "new_image",
    "load_png",
    "save_png",
    "srgb_to_linear",
    "linear_to_srgb",
]


@dataclass
class Image:
    """A width x height grid of linear-light RGB triples.

    ``data`` is an (height, width, 3) float64 array. Channels are nominally
    in [0, 1]; they may exceed that range transiently inside render
    accumulation and are clamped at encode time. Images are treated as
    immutable values once constructed.
    """

    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"image data must be (H, W, 3), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image dimensions must be >= 1")
        self.data = arr

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def assert_finite(self) -> "Image":
        if not np.isfinite(self.data).all():
            raise ValueError("image contains non-finite channel values")
        return self

    def clamped(self) -> "Image":
        return Image(np.clip(self.data, 0.0, 1.0))


def new_image(width: int, height: int, fill=(0.0, 0.0, 0.0)) -> Image:
    """Create a constant image of the given size."""
    if width < 1 or height < 1:
        raise ValueError(f"image dimensions must be >= 1, got {width}x{height}")
    fill = np.asarray(fill, dtype=np.float64)
    if fill.shape != (3,) or not np.isfinite(fill).all():
        raise ValueError("fill must be a finite RGB triple")
    return Image(np.broadcast_to(fill, (height, width, 3)).copy())


def srgb_to_linear(code: np.ndarray) -> np.ndarray:
    """sRGB-encoded values in [0, 1] -> linear light (IEC 61966-2-1)."""
    code = np.asarray(code, dtype=np.float64)
    return np.where(
        code <= 0.04045,
        code / 12.92,
        ((code + 0.055) / 1.055) ** 2.4,
    )


def linear_to_srgb(linear: np.ndarray) -> np.ndarray:
    """Linear light in [0, 1] -> sRGB-encoded values in [0, 1]."""
    linear = np.asarray(linear, dtype=np.float64)
    return np.where(
        linear <= 0.0031308,
        linear * 12.92,
        1.055 * np.power(linear, 1.0 / 2.4) - 0.055,
    )


def load_png(path) -> Image:
    """Load an 8- or 16-bit RGB/RGBA PNG as a linear-light Image.

    Alpha is discarded. Other colortypes (grayscale) and bit depths are
    rejected with FormatError.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise InputIOError(f"no such file: {path}")
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise FormatError(f"not a decodable PNG: {path}")
    if raw.ndim != 3 or raw.shape[2] not in (3, 4):
        raise FormatError(f"unsupported colortype (need RGB or RGBA): {path}")
    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype == np.uint16:
        scale = 65535.0
    else:
        raise FormatError(f"unsupported bit depth {raw.dtype}: {path}")
    bgr = raw[:, :, :3].astype(np.float64) / scale
    rgb = bgr[:, :, ::-1]
    return Image(srgb_to_linear(rgb))


def save_png(image: Image, path, bitdepth: int = 8) -> None:
    """Write an Image as an sRGB PNG, clamping channels to [0, 1].

    The file round-trips through load_png within the quantization error of
    the chosen depth (see tests for the exact bounds).
    """
    if bitdepth not in (8, 16):
        raise ValueError(f"bitdepth must be 8 or 16, got {bitdepth}")
    code = linear_to_srgb(np.clip(image.data, 0.0, 1.0))
    if bitdepth == 8:
        quant = np.round(code * 255.0).astype(np.uint8)
    else:
        quant = np.round(code * 65535.0).astype(np.uint16)
    bgr = np.ascontiguousarray(quant[:, :, ::-1])
    try:
        ok = cv2.imwrite(os.fspath(path), bgr)
    except cv2.error as exc:
        raise InputIOError(f"cannot write {path}: {exc}") from exc
    if not ok:
        raise InputIOError(f"cannot write {path}")
