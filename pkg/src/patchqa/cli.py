"""Command-line interface: ``patchqa {train,score,rank,select,degrade,eval}``."""
import argparse
import logging
import sys
from pathlib import Path


from . import evalharness as E
from . import variations as V
from .dffs import train_pca
from .imagecore import PatchConfig
from .imagefiles import expand_paths, load_face, save_gray
from .model import read_model, score_batch, train, write_model
from .selection import DEFAULT_REJECT_FRACTION, calibrate_threshold, rank_by_quality, select_above, select_top_n

log = logging.getLogger("patchqa")

KIND_ALIASES = {
    "hs": V.HORIZONTAL_SHIFT,
    "vs": V.VERTICAL_SHIFT,
    "rt": V.ROTATION,
    "sc": V.SCALE,
    "sh": V.BLUR,
    "blur": V.BLUR,
    "rotation": V.ROTATION,
    "scale": V.SCALE,
}


class CLIError(Exception):
    pass


def _fmt(x):
    return f"{x:.17g}"


def _kind(name):
    kind = KIND_ALIASES.get(name.lower(), name.lower())
    if kind not in V.KINDS:
        raise CLIError(f"unknown degradation kind {name!r}")
    return kind


def _score_paths(model, paths, workers):
    paths = expand_paths(paths)
    if not paths:
        raise CLIError("no images given")
    images = []
    for p in paths:
        try:
            images.append(load_face(p, model.image_side))
        except (OSError, ValueError) as exc:
            raise CLIError(f"cannot read image {p}: {exc}") from None
    results = score_batch(model, images, ids=[str(p) for p in paths], workers=workers)
    bad = [r for r in results if not r.ok]
    if bad:
        raise CLIError(f"cannot score {bad[0].image_id}: {bad[0].error}")
    return results


def _load_model(path):
    try:
        return read_model(path)
    except OSError as exc:
        raise CLIError(f"cannot read model {path}: {exc}") from None
    except ValueError as exc:
        raise CLIError(f"invalid model {path}: {exc}") from None


def cmd_train(args):
    cfg = PatchConfig(args.patch_size, args.overlap)
    paths = expand_paths([args.input])
    images = []
    for p in paths:
        try:
            images.append(load_face(p, args.side))
        except (OSError, ValueError) as exc:
            log.warning("skipping unreadable image %s: %s", p, exc)
    if len(images) < args.d + 2:
        raise CLIError(f"need at least {args.d + 2} readable images, found {len(images)} in {args.input}")
    model = train(images, cfg, args.d, ridge=args.ridge)
    write_model(model, args.output)
    print(f"trained on {len(images)} images, N={model.n_locations} locations -> {args.output}")


def cmd_score(args):
    model = _load_model(args.model)
    for r in _score_paths(model, args.images, args.workers):
        print(f"{r.image_id}\t{_fmt(r.score)}")


def cmd_rank(args):
    model = _load_model(args.model)
    scored = _score_paths(model, args.images, args.workers)
    result = rank_by_quality(scored)
    for rank, (i, s) in enumerate(zip(result.ordered_ids, result.scores)):
        print(f"{rank}\t{i}\t{_fmt(s)}")


def _read_calibration(path):
    scores = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                scores.append(float(line.split("\t")[-1]))
    return scores


def cmd_select(args):
    if args.top is not None and args.reject_fraction is not None:
        raise CLIError("give either --top or --reject-fraction, not both")
    if args.top is None and args.reject_fraction is None:
        raise CLIError("one of --top or --reject-fraction is required")
    if args.top is not None and args.top < 1:
        raise CLIError("--top must be at least 1")
    if args.reject_fraction is not None and args.calibration is None:
        raise CLIError("--reject-fraction needs --calibration")
    model = _load_model(args.model)
    result = rank_by_quality(_score_paths(model, args.images, args.workers))
    if args.top is not None:
        result = select_top_n(result, args.top)
    else:
        try:
            tau = calibrate_threshold(_read_calibration(args.calibration), args.reject_fraction)
        except (OSError, ValueError) as exc:
            raise CLIError(f"bad calibration file {args.calibration}: {exc}") from None
        result = select_above(result, tau)
        print(f"# threshold\t{_fmt(tau)}")
    scores = dict(zip(result.ordered_ids, result.scores))
    for i in result.selected_ids:
        print(f"{i}\t{_fmt(scores[i])}")


def cmd_degrade(args):
    kind = _kind(args.kind)
    try:
        img = load_face(args.input, args.side)
    except (OSError, ValueError) as exc:
        raise CLIError(f"cannot read image {args.input}: {exc}") from None
    mag = args.magnitude
    if kind in (V.HORIZONTAL_SHIFT, V.VERTICAL_SHIFT, V.BLUR):
        if mag != int(mag):
            raise CLIError(f"{kind} needs an integer magnitude")
        mag = int(mag)
    if mag not in V.preset_grid(kind, args.side):
        log.warning("magnitude %s is outside the preset grid for %s", mag, kind)
    try:
        out = V.apply(img, V.Degradation(kind, mag))
    except ValueError as exc:
        raise CLIError(str(exc)) from None
    save_gray(args.output, out)


def cmd_eval(args):
    kinds = [_kind(k) for k in args.kinds.split(",")]
    names = [s.strip() for s in args.scorers.split(",") if s.strip()]
    n_values = [int(n) for n in args.n_values.split(",")]
    train_faces = E.generate_synthetic_faces(args.seed, args.train_count, args.side)
    test_faces = E.generate_synthetic_faces(args.seed + 1, args.test_count, args.side)

    scorers = {}
    for name in names:
        if name == "proposed":
            model = train(train_faces, PatchConfig(args.patch_size, args.overlap), args.d, created="")
            scorers[name] = E.proposed_scorer(model)
        elif name == "dffs":
            scorers[name] = E.dffs_scorer(train_pca(train_faces))
        elif name == "oracle":
            scorers[name] = E.severity_oracle_scorer
        else:
            raise CLIError(f"unknown scorer {name!r}")

    groups = E.build_variant_groups(test_faces, kinds)
    sets = E.pool_by_identity(groups)
    reports = {n: E.best_variant_accuracy(groups, s, workers=args.workers) for n, s in scorers.items()}
    curves = {n: E.subset_quality_curve(sets, s, n_values, workers=args.workers) for n, s in scorers.items()}

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = E.accuracy_table(reports)
    (out / "accuracy.txt").write_text(table)
    (out / "accuracy.csv").write_text(E.accuracy_csv(reports))
    (out / "subset_curve.txt").write_text(E.curve_table(curves))
    (out / "subset_curve.csv").write_text(E.curve_csv(curves))
    print(table, end="")
    print(f"reports written to {out}")


def build_parser():
    p = argparse.ArgumentParser(prog="patchqa", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def model_cmd(name, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("model", help="model file written by 'train'")
        s.add_argument("images", nargs="+", help="image files or directories")
        s.add_argument("--workers", type=int, default=None)
        return s

    t = sub.add_parser("train", help="train a quality model from aligned face images")
    t.add_argument("input", help="directory of aligned training faces")
    t.add_argument("-o", "--output", required=True)
    t.add_argument("--side", type=int, default=64)
    t.add_argument("--patch-size", type=int, default=8)
    t.add_argument("--overlap", type=int, default=7)
    t.add_argument("-d", type=int, default=3, help="DCT coefficients per patch")
    t.add_argument("--ridge", type=float, default=1e-6, help="relative covariance ridge")
    t.set_defaults(func=cmd_train)

    model_cmd("score", "print the quality score of each image").set_defaults(func=cmd_score)
    model_cmd("rank", "print images in descending quality order").set_defaults(func=cmd_rank)
    s = model_cmd("select", "print the retained subset of images")
    s.add_argument("--top", type=int, default=None, help="keep the N best images")
    s.add_argument("--reject-fraction", type=float, default=None,
                   help=f"reject below this quantile of calibration scores (e.g. {DEFAULT_REJECT_FRACTION})")
    s.add_argument("--calibration", help="file of reference scores, one per line ('score' output works)")
    s.set_defaults(func=cmd_select)

    d = sub.add_parser("degrade", help="apply one synthetic degradation")
    d.add_argument("input")
    d.add_argument("kind", help="horizontal_shift|vertical_shift|in_plane_rotation|scale_change|blur_resample (or hs/vs/rt/sc/sh)")
    d.add_argument("magnitude", type=float)
    d.add_argument("output")
    d.add_argument("--side", type=int, default=64)
    d.set_defaults(func=cmd_degrade)

    e = sub.add_parser("eval", help="run the synthetic best-variant benchmark")
    e.add_argument("--out-dir", required=True)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--train-count", type=int, default=200)
    e.add_argument("--test-count", type=int, default=50)
    e.add_argument("--side", type=int, default=64)
    e.add_argument("--patch-size", type=int, default=8)
    e.add_argument("--overlap", type=int, default=7)
    e.add_argument("-d", type=int, default=3)
    e.add_argument("--kinds", default=",".join(V.KINDS))
    e.add_argument("--scorers", default="proposed,dffs", help="comma list of proposed, dffs (oracle: test only)")
    e.add_argument("--n-values", default="1,2,4,8")
    e.add_argument("--workers", type=int, default=None)
    e.set_defaults(func=cmd_eval)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        args.func(args)
    except CLIError as exc:
        print(f"patchqa: error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"patchqa: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
