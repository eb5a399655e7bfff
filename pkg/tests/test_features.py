import math

import numpy as np
import pytest

from patchqa.features import (
    dct2,
    dct_matrix,
    feature_basis,
    features_from_log,
    idct2,
    image_features,
    select_low_freq,
    zigzag_order,
)
from patchqa.imagecore import PatchConfig, extract_patches, log_normalize, normalize_patch


def naive_dct2(p):
    """Direct O(n^4) orthonormal DCT-II summation."""
    n = p.shape[0]
    out = np.zeros((n, n))
    for u in range(n):
        for v in range(n):
            au = math.sqrt((1 if u == 0 else 2) / n)
            av = math.sqrt((1 if v == 0 else 2) / n)
            acc = 0.0
            for x in range(n):
                for y in range(n):
                    acc += p[x, y] * math.cos(math.pi * (2 * x + 1) * u / (2 * n)) * math.cos(
                        math.pi * (2 * y + 1) * v / (2 * n))
            out[u, v] = au * av * acc
    return out


def test_dct_matrix_orthonormal():
    for n in (1, 2, 5, 8):
        t = dct_matrix(n)
        np.testing.assert_allclose(t @ t.T, np.eye(n), atol=1e-14)


def test_dct2_examples(rng):
    assert np.array_equal(dct2(np.zeros((8, 8))), np.zeros((8, 8)))
    c = dct2(np.full((8, 8), 2.5))
    assert c[0, 0] == pytest.approx(20.0, abs=1e-12)
    c[0, 0] = 0
    assert np.max(np.abs(c)) < 1e-12
    for _ in range(5):
        p = rng.normal(size=(8, 8))
        np.testing.assert_allclose(dct2(p), naive_dct2(p), atol=1e-9)


def test_dct2_linear_and_invertible(rng):
    p, q = rng.normal(size=(2, 8, 8))
    np.testing.assert_allclose(dct2(2.0 * p - 3.0 * q), 2.0 * dct2(p) - 3.0 * dct2(q), atol=1e-9)
    np.testing.assert_allclose(idct2(dct2(p)), p, atol=1e-9)


def test_dct2_rejects_non_square():
    with pytest.raises(ValueError):
        dct2(np.zeros((3, 4)))


def test_zigzag_prefix():
    assert zigzag_order(8)[:10] == ((0, 0), (0, 1), (1, 0), (2, 0), (1, 1), (0, 2), (0, 3), (1, 2), (2, 1), (3, 0))
    assert sorted(zigzag_order(4)) == [(r, c) for r in range(4) for c in range(4)]


def test_select_low_freq():
    c = np.arange(64.0).reshape(8, 8)
    np.testing.assert_array_equal(select_low_freq(c, 3), [c[0, 1], c[1, 0], c[2, 0]])
    with pytest.raises(ValueError):
        select_low_freq(c, 64)
    np.testing.assert_allclose(select_low_freq(dct2(np.full((8, 8), 7.0)), 5), np.zeros(5), atol=1e-12)
    assert np.array_equal(select_low_freq(dct2(normalize_patch(np.full((8, 8), 7.0))), 5), np.zeros(5))
    t = dct_matrix(8)
    np.testing.assert_allclose(select_low_freq(dct2(np.outer(t[0], t[1])), 3), [1, 0, 0], atol=1e-9)


def test_feature_basis_matches_dct(rng):
    basis = feature_basis(8, 6)
    p = rng.normal(size=(8, 8))
    np.testing.assert_allclose(np.tensordot(basis, p, axes=2), select_low_freq(dct2(p), 6), atol=1e-12)


def test_features_match_per_patch_pipeline(rng):
    img = rng.uniform(0, 255, (24, 20))
    img[:9, :9] = 40.0  # flat region
    cfg = PatchConfig(8, 6)
    feats = image_features(img, cfg, 4)
    ref = np.array([select_low_freq(dct2(normalize_patch(p)), 4) for p in extract_patches(log_normalize(img), cfg)])
    np.testing.assert_allclose(feats, ref, atol=1e-12)
    assert np.array_equal(feats[0], np.zeros(4))


def test_features_affine_invariant(rng):
    p = rng.uniform(0, 5, (8, 8))
    ref = select_low_freq(dct2(normalize_patch(p)), 3)
    for a, b in [(0.5, -5), (2, 0), (10, 13)]:
        np.testing.assert_allclose(select_low_freq(dct2(normalize_patch(a * p + b)), 3), ref, atol=1e-9)


def test_features_from_log_accepts_negative(rng):
    log_img = rng.normal(size=(16, 16)) - 10
    assert features_from_log(log_img, PatchConfig(8, 4), 3).shape == (9, 3)
