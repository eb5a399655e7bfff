"""Exit criteria. Each test records one PASS/FAIL line in the terminal summary."""
import json
import logging
import math

import numpy as np
import pytest

from oracles import gaussian_density
from patchqa import evalharness as E
from patchqa import variations as V
from patchqa.cli import main
from patchqa.dffs import dffs_score, train_pca
from patchqa.features import dct2, features_from_log, select_low_freq
from patchqa.imagecore import PatchConfig, extract_patches, log_normalize, normalize_patch
from patchqa.model import (
    LocationGaussian,
    ModelFormatError,
    load_model,
    location_log_densities,
    log_density,
    quality_score,
    read_model,
    save_model,
)
from patchqa.selection import rank_scores, select_top_n

pytestmark = pytest.mark.acceptance
log = logging.getLogger(__name__)

# regression constants frozen from the first calibrated run (seeds 0 / 1)
FROZEN_PROPOSED = {V.HORIZONTAL_SHIFT: 100.0, V.VERTICAL_SHIFT: 100.0, V.ROTATION: 100.0,
                   V.SCALE: 100.0, V.BLUR: 100.0}
FROZEN_DFFS = {V.HORIZONTAL_SHIFT: 100.0, V.VERTICAL_SHIFT: 100.0, V.ROTATION: 100.0,
               V.SCALE: 100.0, V.BLUR: 96.0}

LADDERS = {
    V.HORIZONTAL_SHIFT: [(0, 2, 4, 6, 8), (0, -2, -4, -6, -8)],
    V.VERTICAL_SHIFT: [(0, 2, 4, 6, 8), (0, -2, -4, -6, -8)],
    V.ROTATION: [(0, 10, 20, 30), (0, -10, -20, -30)],
    V.SCALE: [(1.0, 0.9, 0.8, 0.7), (1.0, 1.1, 1.2, 1.3)],
    V.BLUR: [(64, 48, 32, 16)],
}


def direct_dct2(patches):
    """Orthonormal DCT-II by direct summation over every (u, v, x, y)."""
    n = patches.shape[-1]
    idx = np.arange(n)
    cos = np.cos(np.pi * (2 * idx[None, :] + 1) * idx[:, None] / (2 * n))  # [u, x]
    alpha = np.where(idx == 0, math.sqrt(1 / n), math.sqrt(2 / n))
    kernel = (alpha[:, None, None, None] * alpha[None, :, None, None]
              * cos[:, None, :, None] * cos[None, :, None, :])  # [u, v, x, y]
    return np.einsum("uvxy,pxy->puv", kernel, patches)


def test_c01_dct_oracle(rng, criterion):
    patches = rng.normal(size=(1000, 8, 8))
    fast = np.stack([dct2(p) for p in patches])
    ref = direct_dct2(patches)
    err = np.max(np.abs(fast - ref))
    parseval = np.max(np.abs(np.sum(fast ** 2, axis=(1, 2)) - np.sum(patches ** 2, axis=(1, 2))))
    ok = criterion(err < 1e-9 and parseval < 1e-9, f"max|dct2-direct|={err:.2e} parseval={parseval:.2e}")
    assert ok


def test_c02_gaussian_density_oracle(rng, criterion):
    worst = 0.0
    peak_ok = True
    for t in range(1000):
        d = (1, 2, 3, 5)[t % 4]
        a = rng.normal(size=(d, d))
        cov = a @ a.T + rng.uniform(0.05, 2.0) * np.eye(d)
        mu = rng.normal(size=d) * 3
        x = mu + rng.normal(size=d) * rng.uniform(0.1, 2.0)
        g = LocationGaussian.from_covariance(mu, cov)
        ref = math.log(gaussian_density(x.tolist(), mu.tolist(), cov.tolist()))
        worst = max(worst, abs(log_density(g, x) - ref))
        top = log_density(g, mu)
        dirs = rng.normal(size=(100, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        deltas = rng.choice([0.1, 1.0, 10.0], size=100)
        peak_ok &= all(top > log_density(g, mu + s * e) for s, e in zip(deltas, dirs))
    ok = criterion(worst < 1e-9 and peak_ok, f"max|err|={worst:.2e} peak_at_mean={peak_ok}")
    assert ok


def test_c03_score_decomposition(face_model, criterion):
    n_loc = PatchConfig().count((64, 64))
    gs = face_model.gaussians
    seeds = np.random.default_rng(2024).integers(0, 2**31, size=50)
    worst = 0.0
    for s in seeds:
        img = E.generate_synthetic_faces(int(s), 1)[0]
        terms = [log_density(gs[i], select_low_freq(dct2(normalize_patch(p)), 3))
                 for i, p in enumerate(extract_patches(log_normalize(img)))]
        worst = max(worst, abs(quality_score(face_model, img) - math.fsum(terms)))
    ok = criterion(worst < 1e-9 and n_loc == 3249 == face_model.n_locations, f"max|Q-sum|={worst:.2e} N={n_loc}")
    assert ok


def test_c04_affine_invariance(face_model, test_faces, criterion):
    n_loc = face_model.n_locations
    worst = 0.0
    for img in test_faces[:10]:
        lg = log_normalize(img)
        base = np.sum(location_log_densities(face_model, features_from_log(lg)))
        for a in (0.5, 2.0, 10.0):
            for b in (-5.0, 0.0, 13.0):
                q = np.sum(location_log_densities(face_model, features_from_log(a * lg + b)))
                worst = max(worst, abs(q - base))
    ok = criterion(worst < 1e-6 * n_loc, f"max|dQ|={worst:.2e} bound={1e-6 * n_loc:.2e}")
    assert ok


def test_c05_separation(face_model, eigen_model, test_faces, criterion):
    groups = E.build_variant_groups(test_faces)
    prop = E.best_variant_accuracy(groups, E.proposed_scorer(face_model))
    dffs = E.best_variant_accuracy(groups, E.dffs_scorer(eigen_model))
    above = all(prop.per_kind[k] >= 90.0 for k in V.KINDS)
    beats = prop.per_kind[V.BLUR] > dffs.per_kind[V.BLUR]
    frozen = prop.per_kind == FROZEN_PROPOSED and dffs.per_kind == FROZEN_DFFS
    detail = ("proposed " + " ".join(f"{E.KIND_LABELS[k]}={prop.per_kind[k]:.1f}" for k in V.KINDS)
              + f" | dffs SH={dffs.per_kind[V.BLUR]:.1f}")
    ok = criterion(above and beats and frozen, detail)
    assert ok


def test_c06_monotone_ladders(face_model, test_faces, criterion):
    fractions = {}
    for kind, ladders in LADDERS.items():
        good = total = 0
        for ident, img in enumerate(test_faces):
            for ladder in ladders:
                q = [quality_score(face_model, V.apply(img, V.Degradation(kind, m))) for m in ladder]
                total += 1
                bad = [(ladder[i], ladder[i + 1]) for i in range(len(q) - 1) if q[i + 1] > q[i]]
                if bad:
                    log.warning("face %d %s: Q rises between magnitudes %s", ident, kind, bad)
                else:
                    good += 1
        fractions[kind] = good / total
    ok = criterion(all(f >= 0.85 for f in fractions.values()),
                   " ".join(f"{E.KIND_LABELS[k]}={f:.2f}" for k, f in fractions.items()))
    assert ok


def test_c07_selection_oracle(rng, criterion):
    def reference(scores):
        return [i for _, i in sorted(((-s, i) for i, s in enumerate(scores)))]

    ok_sort = True
    for t in range(1000):
        size = int(rng.integers(1, 60))
        scores = rng.integers(-5, 6, size=size).astype(float) if t % 2 else rng.normal(size=size)
        res = rank_scores(scores.tolist())
        ok_sort &= list(res.ordered_ids) == reference(scores.tolist())
        n = int(rng.integers(1, 70))
        ok_sort &= list(select_top_n(res, n).selected_ids) == reference(scores.tolist())[:n]
    base = rng.normal(size=200)
    ref_order = rank_scores(base).ordered_ids
    transforms = [np.exp, np.arctan, np.cbrt, lambda s: s ** 3, lambda s: 7 * s - 2, lambda s: np.tanh(s / 3),
                  lambda s: np.exp(s) + s, lambda s: 1 / (1 + np.exp(-s)), lambda s: np.sinh(s), lambda s: s + 1e6]
    ok_inv = all(rank_scores(f(base)).ordered_ids == ref_order for f in transforms)
    ok = criterion(ok_sort and ok_inv, f"reference_sort={ok_sort} argmax_invariance={ok_inv}")
    assert ok


def test_c08_serialization(face_model, rng, criterion):
    data = save_model(face_model)
    m2 = load_model(data)
    diffs = [quality_score(m2, img) - quality_score(face_model, img)
             for img in (rng.uniform(0, 255, (64, 64)) for _ in range(20))]
    exact = all(d == 0.0 for d in diffs)
    rejected = 0
    doc = json.loads(data)
    doc["format_version"] = 2
    bad_streams = [data[:-200], data[:10], b"\x00\x01garbage", json.dumps(doc).encode()]
    for bad in bad_streams:
        try:
            load_model(bad)
        except ModelFormatError:
            rejected += 1
    ok = criterion(exact and rejected == len(bad_streams), f"exact_round_trip={exact} rejected={rejected}/{len(bad_streams)}")
    assert ok


def test_c09_dffs_properties(rng, criterion):
    side, dims = 12, 3
    mean = rng.uniform(50, 200, side * side)
    q, _ = np.linalg.qr(rng.normal(size=(side * side, dims)))
    imgs = [(mean + c @ q.T).reshape(side, side) for c in rng.normal(size=(40, dims)) * 20]
    exact = train_pca(imgs, standardize=False)
    recon = max(abs(dffs_score(exact, im)) for im in imgs)
    k_ok = exact.k == dims

    noisy = [rng.uniform(0, 255, (side, side)) for _ in range(40)]
    m = train_pca(noisy, k=8, standardize=False)
    p = m.basis @ m.basis.T
    proj = 0.0
    for _ in range(20):
        img = rng.uniform(0, 255, (side, side))
        e = img.reshape(-1) - m.mean_face
        proj = max(proj, abs(dffs_score(m, img) + np.linalg.norm(e - p @ e)))
    inside = max(abs(dffs_score(m, (m.mean_face + m.basis @ rng.normal(size=8) * 30).reshape(side, side)))
                 for _ in range(20))
    ok = criterion(recon < 1e-8 and inside < 1e-8 and proj < 1e-6 and k_ok,
                   f"in_subspace={max(recon, inside):.1e} projector={proj:.1e} k={exact.k}")
    assert ok


def test_c10_cli_determinism(tmp_path, capsys, criterion):
    args = ["eval", "--seed", "7", "--train-count", "40", "--test-count", "4"]
    assert main(args + ["--out-dir", str(tmp_path / "r1")]) == 0
    assert main(args + ["--out-dir", str(tmp_path / "r2")]) == 0
    names = ["accuracy.txt", "accuracy.csv", "subset_curve.txt", "subset_curve.csv"]
    same_reports = all((tmp_path / "r1" / n).read_bytes() == (tmp_path / "r2" / n).read_bytes() for n in names)

    from patchqa.imagefiles import save_gray

    faces = tmp_path / "faces"
    faces.mkdir()
    for i, f in enumerate(E.generate_synthetic_faces(8, 10)):
        save_gray(faces / f"{i:02d}.png", f)
    assert main(["train", str(faces), "-o", str(tmp_path / "m1.json")]) == 0
    assert main(["train", str(faces), "-o", str(tmp_path / "m2.json")]) == 0
    capsys.readouterr()
    m1, m2 = read_model(tmp_path / "m1.json"), read_model(tmp_path / "m2.json")
    probe = E.generate_synthetic_faces(99, 5)
    same_scores = all(quality_score(m1, p) == quality_score(m2, p) for p in probe)
    ok = criterion(same_reports and same_scores, f"identical_reports={same_reports} identical_scores={same_scores}")
    assert ok
