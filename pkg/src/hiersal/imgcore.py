"""Pixel-grid types, image I/O and sRGB to CIELab conversion.

Images are plain numpy arrays in row-major (height, width, ...) layout:

* RGB image: ``uint8`` array of shape ``(H, W, 3)``
* Lab image: ``float64`` array of shape ``(H, W, 3)``, L in [0, 100]
* gray map: ``float64`` array of shape ``(H, W)``; saliency maps, masks and
  UCM strengths all use this representation
"""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .exceptions import DimensionError, ImageFormatError, ImageIOError

# sRGB primaries to XYZ, D65 reference white (IEC 61966-2-1).
_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
D65_WHITE = np.array([0.95047, 1.0, 1.08883])

_EPS = (6.0 / 29.0) ** 3
_KAPPA = 3.0 * (6.0 / 29.0) ** 2


def check_rgb(img) -> np.ndarray:
    """Validate an RGB image and return it as a ``uint8`` array."""
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DimensionError(f"expected an (H, W, 3) RGB image, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError("image must be at least 1x1")
    if arr.dtype != np.uint8:
        if np.issubdtype(arr.dtype, np.floating) and arr.size and arr.max() <= 1.0:
            arr = np.floor(arr * 255.0 + 0.5)
        arr = np.clip(arr, 0, 255).astype(np.uint8)
    return arr


def check_gray(gray) -> np.ndarray:
    arr = np.asarray(gray, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"expected an (H, W) gray map, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("gray map contains non-finite values")
    return arr


def srgb_to_linear(c: np.ndarray) -> np.ndarray:
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def rgb_to_lab(img) -> np.ndarray:
    """Convert an 8-bit sRGB image to CIELab (D65 white).

    Args:
        img: ``(H, W, 3)`` uint8 array (or a single ``(3,)`` triple).

    Returns:
        float64 array of the same leading shape holding L, a, b.
    """
    arr = np.asarray(img)
    single = arr.ndim == 1
    if single:
        arr = arr.reshape(1, 1, 3)
    arr = check_rgb(arr)
    lin = srgb_to_linear(arr.astype(np.float64) / 255.0)
    xyz = lin @ _SRGB_TO_XYZ.T
    t = xyz / D65_WHITE
    f = np.where(t > _EPS, np.cbrt(t), t / _KAPPA + 4.0 / 29.0)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab.reshape(3) if single else lab


def _open(path) -> Image.Image:
    path = Path(path)
    if not path.is_file():
        raise ImageIOError(f"no such image file: {path}")
    try:
        im = Image.open(path)
        im.load()
    except UnidentifiedImageError as exc:
        raise ImageFormatError(f"cannot decode {path}: {exc}") from exc
    except (OSError, SyntaxError, ValueError) as exc:
        # PIL reports truncated or corrupt payloads as OSError/SyntaxError.
        if not os.access(path, os.R_OK):
            raise ImageIOError(f"cannot read {path}") from exc
        raise ImageFormatError(f"cannot decode {path}: {exc}") from exc
    return im


def load_image(path) -> np.ndarray:
    """Read a PNG/PPM/PGM file as an ``(H, W, 3)`` uint8 RGB array."""
    im = _open(path)
    if im.mode in ("I;16", "I;16B", "I;16L", "I"):
        gray = (np.asarray(im, dtype=np.float64) / 65535.0 * 255.0 + 0.5).astype(np.uint8)
        return np.repeat(gray[..., None], 3, axis=2)
    return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def load_gray(path) -> np.ndarray:
    """Read a gray image scaled to [0, 1].

    8-bit inputs are divided by 255 and 16-bit inputs (typically UCM
    strength maps) by 65535. Colour inputs are converted to luma first.
    """
    im = _open(path)
    if im.mode in ("I;16", "I;16B", "I;16L", "I"):
        return np.asarray(im, dtype=np.float64) / 65535.0
    if im.mode == "F":
        return np.asarray(im, dtype=np.float64)
    if im.mode == "1":
        return np.asarray(im, dtype=np.float64)
    return np.asarray(im.convert("L"), dtype=np.float64) / 255.0


def to_uint8(gray) -> np.ndarray:
    """Scale a [0, 1] map to 8 bits with round-half-up."""
    arr = np.clip(np.asarray(gray, dtype=np.float64), 0.0, 1.0)
    return np.floor(arr * 255.0 + 0.5).astype(np.uint8)


def save_gray(path, gray) -> None:
    """Write a [0, 1] map (or an already quantised uint8 map) as an 8-bit gray PNG."""
    gray = np.asarray(gray)
    if gray.dtype != np.uint8:
        gray = to_uint8(gray)
    Image.fromarray(gray).save(path, format="PNG")


def save_rgb(path, img) -> None:
    Image.fromarray(check_rgb(img)).save(path, format="PNG")


def binarize_mask(gray, threshold: float = 0.5) -> np.ndarray:
    """Boolean mask of pixels at or above ``threshold``."""
    return np.asarray(gray, dtype=np.float64) >= threshold
