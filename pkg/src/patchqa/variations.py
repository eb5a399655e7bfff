"""Synthetic alignment and sharpness degradations.

Conventions: positive ``dx`` moves content right and positive ``dy`` moves
it down; positive rotation angles turn content counter-clockwise as
displayed; rotation and scaling act about the image center. All warps use
inverse mapping with bilinear interpolation, and every out-of-range sample
is taken from the nearest edge pixel.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import _accel
from .imagecore import as_gray_image

HORIZONTAL_SHIFT = "horizontal_shift"
VERTICAL_SHIFT = "vertical_shift"
ROTATION = "in_plane_rotation"
SCALE = "scale_change"
BLUR = "blur_resample"

KINDS = (HORIZONTAL_SHIFT, VERTICAL_SHIFT, ROTATION, SCALE, BLUR)

SHIFT_GRID = (0, -2, 2, -4, 4, -6, 6, -8, 8)
ROTATION_GRID = (0, -10, 10, -20, 20, -30, 30)
SCALE_GRID = (0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3)
BLUR_GRID_64 = (48, 32, 16)


@dataclass(frozen=True)
class Degradation:
    kind: str
    magnitude: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown degradation kind {self.kind!r}; expected one of {KINDS}")


def identity_magnitude(kind, side=64):
    """Magnitude at which ``kind`` leaves an image of ``side`` unchanged."""
    if kind == SCALE:
        return 1.0
    if kind == BLUR:
        return side
    if kind in KINDS:
        return 0
    raise ValueError(f"unknown degradation kind {kind!r}")


def preset_grid(kind, side=64):
    """Canonical magnitudes for ``kind``, identity entry included.

    The blur grid is defined for a 64-pixel baseline (48, 32, 16) and is
    scaled proportionally for other sizes.
    """
    if kind in (HORIZONTAL_SHIFT, VERTICAL_SHIFT):
        return SHIFT_GRID
    if kind == ROTATION:
        return ROTATION_GRID
    if kind == SCALE:
        return SCALE_GRID
    if kind == BLUR:
        if side == 64:
            return (64,) + BLUR_GRID_64
        return (side,) + tuple(max(1, round(side * s / 64)) for s in BLUR_GRID_64)
    raise ValueError(f"unknown degradation kind {kind!r}")


def severity(kind, magnitude, side=64):
    """Distance of a magnitude from the identity, in the kind's own units."""
    if kind == BLUR:
        return float(side - magnitude)
    return abs(float(magnitude) - identity_magnitude(kind, side))


def shift(img, dx, dy):
    arr = as_gray_image(img)
    h, w = arr.shape
    if int(dx) != dx or int(dy) != dy:
        raise ValueError("shift offsets must be integers")
    dx, dy = int(dx), int(dy)
    if abs(dx) >= w or abs(dy) >= h:
        raise ValueError(f"shift ({dx}, {dy}) is not smaller than the image size {w}x{h}")
    rows = np.clip(np.arange(h) - dy, 0, h - 1)
    cols = np.clip(np.arange(w) - dx, 0, w - 1)
    return arr[rows[:, None], cols[None, :]]


def _warp_numpy(img, a00, a01, a10, a11, cy, cx):
    h, w = img.shape
    dy = np.arange(h, dtype=np.float64)[:, None] - cy
    dx = np.arange(w, dtype=np.float64)[None, :] - cx
    sy = np.clip(a00 * dy + a01 * dx + cy, 0.0, h - 1.0)
    sx = np.clip(a10 * dy + a11 * dx + cx, 0.0, w - 1.0)
    y0 = np.floor(sy).astype(np.int64)
    x0 = np.floor(sx).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = sy - y0
    fx = sx - x0
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bottom = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bottom * fy


def _warp_loops(img, a00, a01, a10, a11, cy, cx):
    h, w = img.shape
    out = np.empty((h, w))
    for r in range(h):
        dy = r - cy
        for c in range(w):
            dx = c - cx
            sy = min(max(a00 * dy + a01 * dx + cy, 0.0), h - 1.0)
            sx = min(max(a10 * dy + a11 * dx + cx, 0.0), w - 1.0)
            y0 = int(math.floor(sy))
            x0 = int(math.floor(sx))
            y1 = min(y0 + 1, h - 1)
            x1 = min(x0 + 1, w - 1)
            fy = sy - y0
            fx = sx - x0
            top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
            bottom = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
            out[r, c] = top * (1.0 - fy) + bottom * fy
    return out


_warp_numba = _accel.njit(_warp_loops)


def warp_about_center(img, inverse):
    """Resample ``img`` through a 2x2 inverse map acting on (row, col) offsets from the center."""
    arr = as_gray_image(img, allow_negative=True)
    (a00, a01), (a10, a11) = np.asarray(inverse, dtype=np.float64)
    cy = (arr.shape[0] - 1) / 2.0
    cx = (arr.shape[1] - 1) / 2.0
    kernel = _warp_numba if _accel.USE_NUMBA else _warp_numpy
    out = kernel(arr, float(a00), float(a01), float(a10), float(a11), cy, cx)
    # interpolation is convex; clipping only removes rounding overshoot
    return np.clip(out, arr.min(), arr.max(), out=out)


def rotate(img, angle):
    arr = as_gray_image(img)
    if not math.isfinite(angle):
        raise ValueError("rotation angle must be finite")
    if angle % 360 == 0:
        return arr.copy()
    t = math.radians(angle)
    cos, sin = math.cos(t), math.sin(t)
    return warp_about_center(arr, [[cos, sin], [-sin, cos]])


def rescale(img, factor):
    """Scale content about the center by ``factor`` on an unchanged canvas."""
    arr = as_gray_image(img)
    if not 0.1 <= factor <= 10:
        raise ValueError(f"scale factor must lie in [0.1, 10], got {factor}")
    if factor == 1.0:
        return arr.copy()
    inv = 1.0 / factor
    return warp_about_center(arr, [[inv, 0.0], [0.0, inv]])


def _area_matrix(n_out, n_in):
    """Box-averaging weights mapping ``n_in`` samples onto ``n_out`` (n_out <= n_in)."""
    ratio = n_in / n_out
    lo = np.arange(n_out)[:, None] * ratio
    hi = lo + ratio
    j = np.arange(n_in)[None, :]
    overlap = np.clip(np.minimum(hi, j + 1) - np.maximum(lo, j), 0.0, None)
    return overlap / ratio


def _bilinear_matrix(n_out, n_in):
    """Linear interpolation weights with half-pixel centers and edge clamping."""
    src = np.clip((np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5, 0.0, n_in - 1.0)
    j0 = np.floor(src).astype(np.int64)
    j1 = np.minimum(j0 + 1, n_in - 1)
    frac = src - j0
    m = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    np.add.at(m, (rows, j0), 1.0 - frac)
    np.add.at(m, (rows, j1), frac)
    return m


def resize_bilinear(img, shape):
    """Bilinear resize to ``shape`` (rows, cols)."""
    arr = as_gray_image(img, allow_negative=True)
    h, w = int(shape[0]), int(shape[1])
    if h < 1 or w < 1:
        raise ValueError("target size must be positive")
    if (h, w) == arr.shape:
        return arr.copy()
    return _bilinear_matrix(h, arr.shape[0]) @ arr @ _bilinear_matrix(w, arr.shape[1]).T


def downsample_area(img, shape):
    arr = as_gray_image(img, allow_negative=True)
    h, w = int(shape[0]), int(shape[1])
    if not (1 <= h <= arr.shape[0] and 1 <= w <= arr.shape[1]):
        raise ValueError(f"cannot box-downsample {arr.shape} to {(h, w)}")
    if (h, w) == arr.shape:
        return arr.copy()
    return _area_matrix(h, arr.shape[0]) @ arr @ _area_matrix(w, arr.shape[1]).T


def blur_resample(img, intermediate_side):
    """Lose detail by box-downsampling to a square side then resizing back."""
    arr = as_gray_image(img)
    if int(intermediate_side) != intermediate_side or intermediate_side < 1:
        raise ValueError(f"intermediate side must be a positive integer, got {intermediate_side}")
    side = int(intermediate_side)
    if side > min(arr.shape):
        raise ValueError(f"intermediate side {side} exceeds image size {arr.shape}")
    if (side, side) == arr.shape:
        return arr.copy()
    small = downsample_area(arr, (side, side))
    return np.clip(resize_bilinear(small, arr.shape), arr.min(), arr.max())


def apply(img, degradation: Degradation):
    kind, mag = degradation.kind, degradation.magnitude
    if kind == HORIZONTAL_SHIFT:
        return shift(img, mag, 0)
    if kind == VERTICAL_SHIFT:
        return shift(img, 0, mag)
    if kind == ROTATION:
        return rotate(img, mag)
    if kind == SCALE:
        return rescale(img, mag)
    return blur_resample(img, mag)
