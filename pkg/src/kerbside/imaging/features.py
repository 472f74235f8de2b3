"""Texture descriptor for the baseline classifier.

The descriptor concatenates a 256-bin 8-neighbour local-binary-pattern
histogram, a 16-bin gradient-magnitude histogram (forward differences) and
the intensity mean and variance. Histograms are L1-normalised. The recipe is
frozen under DESCRIPTOR_ID so stored feature sets stay comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import KerbsideError
from .image import Image, crop_to_square, resize_bilinear, to_grayscale

PREPROCESS_SIZE = 224

DESCRIPTOR_ID = "lbp256-grad16-moments2:v1"

FEATURE_LENGTH = 256 + 16 + 2

_GRAD_MAX = 255.0 * math.sqrt(2.0)
_GRAD_BINS = 16


class WrongSize(KerbsideError):
    code = "wrong_size"

    def __init__(self, width: int, height: int):
        super().__init__(
            f"feature extraction expects {PREPROCESS_SIZE}x{PREPROCESS_SIZE}, got {width}x{height}"
        )


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    descriptor_id: str = DESCRIPTOR_ID

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature vector contains non-finite values")


def preprocess(img: Image) -> Image:
    """Full preprocessing contract: top-square crop, resize, grayscale."""
    square = crop_to_square(img)
    resized = resize_bilinear(square, PREPROCESS_SIZE)
    return to_grayscale(resized)


def lbp_codes(gray: np.ndarray) -> np.ndarray:
    """8-neighbour LBP codes for interior pixels; neighbour >= centre sets a bit.

    Bit order runs clockwise from the top-left neighbour, so a constant image
    produces the all-ones code 255.
    """
    c = gray[1:-1, 1:-1]
    codes = np.zeros(c.shape, dtype=np.uint8)
    offsets = [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1)]
    for bit, (dy, dx) in enumerate(offsets):
        neighbour = gray[1 + dy : gray.shape[0] - 1 + dy, 1 + dx : gray.shape[1] - 1 + dx]
        codes |= (neighbour >= c).astype(np.uint8) << bit
    return codes


def gradient_magnitudes(gray: np.ndarray) -> np.ndarray:
    """Forward-difference gradient magnitude on the common interior grid."""
    f = gray.astype(np.float64)
    gx = f[:-1, 1:] - f[:-1, :-1]
    gy = f[1:, :-1] - f[:-1, :-1]
    return np.hypot(gx, gy)


def extract_features(img: Image) -> FeatureVector:
    """Compute the frozen texture descriptor of a preprocessed 224x224 image."""
    if img.width != PREPROCESS_SIZE or img.height != PREPROCESS_SIZE:
        raise WrongSize(img.width, img.height)
    gray = to_grayscale(img).pixels

    codes = lbp_codes(gray)
    lbp_hist = np.bincount(codes.ravel(), minlength=256).astype(np.float64)
    lbp_hist /= codes.size

    mag = gradient_magnitudes(gray)
    bins = np.minimum((mag / _GRAD_MAX * _GRAD_BINS).astype(np.intp), _GRAD_BINS - 1)
    grad_hist = np.bincount(bins.ravel(), minlength=_GRAD_BINS).astype(np.float64)
    grad_hist /= mag.size

    f = gray.astype(np.float64)
    moments = np.array([f.mean(), f.var()])

    return FeatureVector(values=np.concatenate([lbp_hist, grad_hist, moments]))
