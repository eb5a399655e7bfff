"""Gray images, log-domain normalization and patch extraction.

A gray image is a 2-D ``float64`` array indexed ``[row, col]`` with finite,
non-negative intensities (nominally 0..255).
"""
from dataclasses import dataclass

import numpy as np

#: Patches whose standard deviation falls below this are treated as flat.
FLAT_EPS = 1e-8


def as_gray_image(img, *, allow_negative=False):
    """Validate ``img`` and return it as a C-contiguous float64 2-D array."""
    arr = np.ascontiguousarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D image, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite pixels")
    if not allow_negative and np.any(arr < 0):
        raise ValueError("image contains negative pixels")
    return arr


def log_normalize(img):
    """Compress dynamic range with ``ln(I + 1)``."""
    return np.log1p(as_gray_image(img))


@dataclass(frozen=True)
class PatchConfig:
    """Square ``size`` x ``size`` patches overlapping neighbours by ``overlap`` pixels."""

    size: int = 8
    overlap: int = 7

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 1:
            raise ValueError(f"patch size must be a positive integer, got {self.size}")
        if int(self.overlap) != self.overlap or not 0 <= self.overlap < self.size:
            raise ValueError(f"overlap must satisfy 0 <= overlap < size, got {self.overlap}")

    @property
    def stride(self):
        return self.size - self.overlap

    def positions(self, side):
        """Number of patch positions along an axis of length ``side``."""
        if side < self.size:
            return 0
        return (side - self.size) // self.stride + 1

    def grid_shape(self, shape):
        rows, cols = self.positions(shape[0]), self.positions(shape[1])
        if rows < 1 or cols < 1:
            raise ValueError(f"image of shape {tuple(shape)} is smaller than a {self.size}x{self.size} patch")
        return rows, cols

    def count(self, shape):
        rows, cols = self.grid_shape(shape)
        return rows * cols


def extract_patches(img, cfg=PatchConfig()):
    """Return all fully-contained patches as an array of shape ``(N, n, n)``.

    Patches are ordered row-major over the patch grid; grid position
    ``(gr, gc)`` covers rows ``gr*stride : gr*stride+n`` and the matching
    columns. No padding is applied.
    """
    arr = as_gray_image(img, allow_negative=True)
    rows, cols = cfg.grid_shape(arr.shape)
    n, s = cfg.size, cfg.stride
    windows = np.lib.stride_tricks.sliding_window_view(arr, (n, n))[::s, ::s]
    assert windows.shape[:2] == (rows, cols)
    return windows.reshape(rows * cols, n, n).copy()


def normalize_patch(patch):
    """Shift/scale a patch to zero mean and unit (population) variance.

    Flat patches (std below ``FLAT_EPS``) map to all zeros.
    """
    p = np.asarray(patch, dtype=np.float64)
    if not np.all(np.isfinite(p)):
        raise ValueError("patch contains non-finite values")
    centered = p - p.mean()
    sd = np.sqrt(np.mean(centered * centered))
    if sd < FLAT_EPS:
        return np.zeros_like(p)
    return centered / sd
