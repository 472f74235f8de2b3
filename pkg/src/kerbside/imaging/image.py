"""In-memory image type and the exact preprocessing contract.

Portrait captures are cropped to a top-anchored square (the bottom rows show
the mounting hardware) and then interpolated down to the classifier input
size using bilinear interpolation with the half-pixel-center convention.
Both steps are deterministic bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import KerbsideError


class NotPortrait(KerbsideError):
    code = "not_portrait"


class InvalidTarget(KerbsideError):
    code = "invalid_target"

    def __init__(self, target: int):
        super().__init__(f"invalid resize target: {target}")
        self.target = target


@dataclass(frozen=True)
class Image:
    """8-bit image; (h, w) grayscale or (h, w, 3) RGB, row-major."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.dtype != np.uint8:
            raise ValueError(f"pixels must be uint8, got {p.dtype}")
        if p.ndim == 2:
            pass
        elif p.ndim == 3 and p.shape[2] == 3:
            pass
        else:
            raise ValueError(f"unsupported pixel shape: {p.shape}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3


def crop_to_square(img: Image) -> Image:
    """Crop a portrait image to width x width, keeping the top rows."""
    if img.height < img.width:
        raise NotPortrait(
            f"expected portrait orientation, got {img.width}x{img.height}"
        )
    return Image(pixels=np.ascontiguousarray(img.pixels[: img.width]))


def resize_bilinear(img: Image, target: int) -> Image:
    """Resize a square image to target x target.

    Source coordinate for destination pixel d is (d + 0.5) * scale - 0.5,
    clamped to the borders. Each output value is the explicit four-corner
    weighted sum p00*w00 + p01*w01 + p10*w10 + p11*w11 (this exact grouping,
    so results are bit-for-bit reproducible), rounded half-up to 8 bits.
    """
    if target < 1:
        raise InvalidTarget(target)
    if img.width != img.height:
        raise ValueError(f"resize input must be square, got {img.width}x{img.height}")
    n = img.width
    src = img.pixels.astype(np.float64)

    scale = n / target
    coords = np.clip((np.arange(target) + 0.5) * scale - 0.5, 0.0, n - 1.0)
    lo = np.floor(coords).astype(np.intp)
    hi = np.minimum(lo + 1, n - 1)
    f_hi = coords - lo
    f_lo = 1.0 - f_hi

    w00 = f_lo[:, None] * f_lo[None, :]
    w01 = f_lo[:, None] * f_hi[None, :]
    w10 = f_hi[:, None] * f_lo[None, :]
    w11 = f_hi[:, None] * f_hi[None, :]
    if src.ndim == 3:
        w00, w01, w10, w11 = (w[:, :, None] for w in (w00, w01, w10, w11))
    p00 = src[lo[:, None], lo[None, :]]
    p01 = src[lo[:, None], hi[None, :]]
    p10 = src[hi[:, None], lo[None, :]]
    p11 = src[hi[:, None], hi[None, :]]
    out = p00 * w00 + p01 * w01 + p10 * w10 + p11 * w11
    return Image(pixels=np.floor(out + 0.5).astype(np.uint8))


def to_grayscale(img: Image) -> Image:
    """Rec. 601 luma conversion (0.299/0.587/0.114), rounding half-up."""
    if img.channels == 1:
        return img
    rgb = img.pixels.astype(np.float64)
    luma = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    return Image(pixels=np.floor(luma + 0.5).astype(np.uint8))
