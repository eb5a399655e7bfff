"""Patch DCT features.

Each normalized patch is described by its first ``d`` AC coefficients of the
orthonormal 2-D DCT-II, taken in JPEG zigzag order (the DC term is dropped).
"""
from functools import lru_cache

import numpy as np

from . import _accel
from .imagecore import FLAT_EPS, PatchConfig, as_gray_image, log_normalize


@lru_cache(maxsize=None)
def _dct_matrix(n):
    k = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    t = np.cos(np.pi * (2 * j + 1) * k / (2 * n)) * np.sqrt(2.0 / n)
    t[0, :] = np.sqrt(1.0 / n)
    t.setflags(write=False)
    return t


def dct_matrix(n):
    """Orthonormal DCT-II matrix ``T`` (``T @ T.T == I``)."""
    if n < 1:
        raise ValueError("DCT size must be positive")
    return _dct_matrix(int(n))


def dct2(patch):
    """Orthonormal 2-D DCT-II of a square matrix: ``T @ P @ T.T``."""
    p = np.asarray(patch, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] < 1:
        raise ValueError(f"dct2 expects a square matrix, got shape {p.shape}")
    t = dct_matrix(p.shape[0])
    return t @ p @ t.T


def idct2(coeffs):
    c = np.asarray(coeffs, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] < 1:
        raise ValueError(f"idct2 expects a square matrix, got shape {c.shape}")
    t = dct_matrix(c.shape[0])
    return t.T @ c @ t


@lru_cache(maxsize=None)
def zigzag_order(n):
    """JPEG zigzag traversal of an ``n`` x ``n`` grid as a tuple of (row, col)."""
    cells = [(r, c) for r in range(n) for c in range(n)]
    # odd anti-diagonals run top-right to bottom-left, even ones the reverse
    return tuple(sorted(cells, key=lambda rc: (rc[0] + rc[1], rc[0] if (rc[0] + rc[1]) % 2 else rc[1])))


def _check_d(n, d):
    if int(d) != d or d < 1 or d > n * n - 1:
        raise ValueError(f"d must be in 1..{n * n - 1} for {n}x{n} patches, got {d}")


def select_low_freq(coeffs, d=3):
    """First ``d`` zigzag-ordered AC coefficients of a DCT coefficient matrix."""
    c = np.asarray(coeffs, dtype=np.float64)
    n = c.shape[0]
    _check_d(n, d)
    order = zigzag_order(n)[1:d + 1]
    return np.array([c[r, k] for r, k in order])


@lru_cache(maxsize=None)
def _feature_basis(n, d):
    t = dct_matrix(n)
    basis = np.stack([np.outer(t[r], t[c]) for r, c in zigzag_order(n)[1:d + 1]])
    basis.setflags(write=False)
    return basis


def feature_basis(n, d):
    """DCT basis images for the retained coefficients, shape ``(d, n, n)``.

    ``np.sum(basis[k] * P)`` equals coefficient ``k`` of
    ``select_low_freq(dct2(P), d)``.
    """
    _check_d(n, d)
    return _feature_basis(int(n), int(d))


def _patch_features_numpy(log_img, n, stride, basis):
    windows = np.lib.stride_tricks.sliding_window_view(log_img, (n, n))[::stride, ::stride]
    flat = windows.reshape(-1, n * n)
    centered = flat - flat.mean(axis=1, keepdims=True)
    sd = np.sqrt(np.mean(centered * centered, axis=1))
    feats = centered @ basis.reshape(basis.shape[0], n * n).T
    flat_rows = sd < FLAT_EPS
    sd[flat_rows] = 1.0
    feats /= sd[:, None]
    feats[flat_rows] = 0.0
    return feats


def _patch_features_loops(log_img, n, stride, basis):
    d = basis.shape[0]
    rows = (log_img.shape[0] - n) // stride + 1
    cols = (log_img.shape[1] - n) // stride + 1
    out = np.zeros((rows * cols, d))
    nn = n * n
    for gr in range(rows):
        r0 = gr * stride
        for gc in range(cols):
            c0 = gc * stride
            i = gr * cols + gc
            mean = 0.0
            for u in range(n):
                for v in range(n):
                    mean += log_img[r0 + u, c0 + v]
            mean /= nn
            var = 0.0
            for u in range(n):
                for v in range(n):
                    dv = log_img[r0 + u, c0 + v] - mean
                    var += dv * dv
            sd = np.sqrt(var / nn)
            if sd < FLAT_EPS:
                continue
            for k in range(d):
                acc = 0.0
                for u in range(n):
                    for v in range(n):
                        acc += basis[k, u, v] * (log_img[r0 + u, c0 + v] - mean)
                out[i, k] = acc / sd
    return out


_patch_features_numba = _accel.njit(_patch_features_loops)


def _patch_features(log_img, n, stride, basis):
    if _accel.USE_NUMBA:
        return _patch_features_numba(log_img, n, stride, basis)
    return _patch_features_numpy(log_img, n, stride, basis)


def features_from_log(log_img, cfg=PatchConfig(), d=3):
    """Feature matrix ``(N, d)`` of an already log-normalized image.

    Equivalent to running ``normalize_patch``, ``dct2`` and
    ``select_low_freq`` on every patch of ``extract_patches(log_img, cfg)``.
    Any finite values are accepted, including negative ones.
    """
    arr = as_gray_image(log_img, allow_negative=True)
    cfg.grid_shape(arr.shape)
    return _patch_features(arr, cfg.size, cfg.stride, feature_basis(cfg.size, d))


def image_features(img, cfg=PatchConfig(), d=3):
    """Log-normalize a raw gray image and return its ``(N, d)`` features."""
    return features_from_log(log_normalize(img), cfg, d)
