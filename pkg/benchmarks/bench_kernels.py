"""Compare the numba and pure-numpy hot kernels.

    python benchmarks/bench_kernels.py [--repeat 20]

Each kernel is warmed up once (JIT compile) before timing; the table shows
the best per-call time over ``--repeat`` runs and the max absolute
difference between the two backends.
"""
import argparse
import timeit

import numpy as np

from patchqa import _accel
from patchqa import evalharness as E
from patchqa import model as M
from patchqa import variations as V
from patchqa.features import _patch_features_numba, _patch_features_numpy, feature_basis
from patchqa.imagecore import log_normalize


def best(fn, repeat):
    fn()
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    faces = E.generate_synthetic_faces(0, 60)
    model = M.train(faces, created="bench")
    img = faces[0]
    log_img = log_normalize(img)
    basis = feature_basis(8, 3)
    feats = _patch_features_numpy(log_img, 8, 1, basis)
    dens_args = (feats, model.means, model.precisions, model.log_dets)
    c, s = np.cos(np.radians(20)), np.sin(np.radians(20))
    warp_args = (img, c, s, -s, c, 31.5, 31.5)

    kernels = [
        ("patch features (3249 x 8x8)", lambda: _patch_features_numba(log_img, 8, 1, basis),
         lambda: _patch_features_numpy(log_img, 8, 1, basis)),
        ("location log densities", lambda: M._location_log_densities_numba(*dens_args),
         lambda: M._location_log_densities_numpy(*dens_args)),
        ("bilinear warp 64x64", lambda: V._warp_numba(*warp_args), lambda: V._warp_numpy(*warp_args)),
    ]
    print(f"{'kernel':<30}{'numba [us]':>12}{'numpy [us]':>12}{'speedup':>9}{'max diff':>11}")
    for name, fast, slow in kernels:
        tf, ts = best(fast, args.repeat), best(slow, args.repeat)
        diff = np.max(np.abs(fast() - slow()))
        print(f"{name:<30}{tf * 1e6:12.1f}{ts * 1e6:12.1f}{ts / tf:9.2f}{diff:11.2e}")

    def score(flag):
        _accel.USE_NUMBA = flag
        return M.quality_score(model, img)

    t_on = best(lambda: score(True), args.repeat)
    t_off = best(lambda: score(False), args.repeat)
    _accel.USE_NUMBA = _accel.HAVE_NUMBA and not _accel.DISABLED
    print(f"{'quality_score end to end':<30}{t_on * 1e6:12.1f}{t_off * 1e6:12.1f}{t_off / t_on:9.2f}")


if __name__ == "__main__":
    main()
