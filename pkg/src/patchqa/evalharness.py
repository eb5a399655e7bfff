"""Controlled quality-ranking experiments on seeded synthetic faces.

Scorers used by the harness are callables taking a :class:`VariantGroup`
and returning one score per image (higher means better quality). Wrap a
per-image function with :func:`image_scorer`.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterable, Mapping, Sequence

import numpy as np

from . import variations as V
from .dffs import dffs_score
from .model import quality_score
from .selection import rank_scores, select_top_n

NOISE_SIGMA = 2.0


def _blob(yy, xx, cy, cx, ry, rx, edge):
    """Soft-edged ellipse: ~1 inside, ~0 outside, sigmoid transition ``edge`` wide."""
    r = np.sqrt(((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2)
    return 1.0 / (1.0 + np.exp((r - 1.0) / edge))


def _gauss(yy, xx, cy, cx, sy, sx):
    return np.exp(-0.5 * (((yy - cy) / sy) ** 2 + ((xx - cx) / sx) ** 2))


def face_template(side=64, jitter=None):
    """Deterministic face-like intensity pattern, bilaterally symmetric.

    ``jitter`` optionally holds per-identity multipliers for the component
    contrasts (keys: ``skin``, ``eyes``, ``nose``, ``mouth``, ``hair``).
    """
    j = {"skin": 1.0, "eyes": 1.0, "nose": 1.0, "mouth": 1.0, "hair": 1.0}
    if jitter:
        j.update(jitter)
    c = np.linspace(-1.0, 1.0, side)
    yy, xx = np.meshgrid(c, c, indexing="ij")
    img = np.full((side, side), 55.0)
    img += 115.0 * j["skin"] * _blob(yy, xx, 0.08, 0.0, 0.86, 0.66, 0.05)
    # broad shading gives low-frequency structure everywhere on the face
    img += 18.0 * _gauss(yy, xx, -0.05, 0.0, 0.45, 0.35) - 14.0 * _gauss(yy, np.abs(xx), 0.15, 0.55, 0.35, 0.12)
    img -= 70.0 * j["hair"] * _blob(yy, xx, -0.95, 0.0, 0.42, 0.8, 0.08)
    # dark features sit more than 8 px apart vertically so shifted copies never re-align
    for sx in (-1.0, 1.0):
        img -= 80.0 * j["eyes"] * _blob(yy, xx, -0.2, sx * 0.3, 0.075, 0.15, 0.06)
        img += 35.0 * _blob(yy, xx, -0.2, sx * 0.3 - sx * 0.02, 0.03, 0.04, 0.2)
        img -= 30.0 * j["nose"] * _blob(yy, xx, 0.17, sx * 0.09, 0.045, 0.05, 0.2)
        img -= 25.0 * _gauss(yy, xx, 0.05, sx * 0.12, 0.2, 0.035)
    img += 25.0 * j["nose"] * _gauss(yy, xx, 0.05, 0.0, 0.22, 0.05)
    img -= 65.0 * j["mouth"] * _blob(yy, xx, 0.47, 0.0, 0.05, 0.24, 0.08)
    img += 20.0 * _blob(yy, xx, 0.6, 0.0, 0.06, 0.2, 0.3)
    return img


def _smooth_field(rng, side, cutoff=4):
    """Random field containing only the lowest ``cutoff`` x ``cutoff`` cosine modes."""
    coeffs = rng.standard_normal((cutoff, cutoff)) / (1.0 + np.add.outer(np.arange(cutoff), np.arange(cutoff)))
    k = np.arange(cutoff)
    basis = np.cos(np.pi * np.outer(np.arange(side) + 0.5, k) / side)
    field = basis @ coeffs @ basis.T
    return field / max(np.std(field), 1e-12)


def generate_synthetic_faces(seed: int, count: int, side: int = 64) -> list:
    """Aligned synthetic face images, deterministic for a given seed.

    Each face is the shared template with per-identity contrast jitter, plus
    a smooth per-identity random field and Gaussian pixel noise
    (sigma = 2 levels), clipped to [0, 255].
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    if side < 8:
        raise ValueError("side must be at least 8")
    rng = np.random.default_rng(seed)
    faces = []
    for _ in range(count):
        jitter = {k: float(rng.uniform(0.8, 1.2)) for k in ("skin", "eyes", "nose", "mouth", "hair")}
        img = face_template(side, jitter)
        img += 8.0 * _smooth_field(rng, side)
        img += NOISE_SIGMA * rng.standard_normal((side, side))
        faces.append(np.clip(img, 0.0, 255.0))
    return faces


@dataclass(frozen=True)
class VariantGroup:
    identity_id: Any
    kind: str
    clean_index: int
    images: tuple
    labels: tuple

    def __post_init__(self):
        side = self.images[self.clean_index].shape[0]
        clean = [i for i, lab in enumerate(self.labels) if V.severity(lab.kind, lab.magnitude, side) == 0]
        if clean != [self.clean_index]:
            raise ValueError("a variant group needs exactly one undegraded image, at clean_index")


def build_variant_groups(images: Sequence, kinds: Iterable[str] = V.KINDS,
                         grids: Mapping[str, Sequence] | None = None) -> list:
    """One group per (image, kind): the clean image followed by every nonzero variant."""
    groups = []
    kinds = list(kinds)
    images = list(images)
    for ident, img in enumerate(images):
        side = img.shape[0]
        for kind in kinds:
            grid = list((grids or {}).get(kind, V.preset_grid(kind, side)))
            ident_mag = V.identity_magnitude(kind, side)
            if ident_mag not in grid:
                raise ValueError(f"grid for {kind} lacks the identity magnitude {ident_mag}")
            labels = [V.Degradation(kind, ident_mag)]
            imgs = [np.asarray(img, dtype=np.float64)]
            for mag in grid:
                if mag == ident_mag:
                    continue
                labels.append(V.Degradation(kind, mag))
                imgs.append(V.apply(img, labels[-1]))
            groups.append(VariantGroup(ident, kind, 0, tuple(imgs), tuple(labels)))
    return groups


def pool_by_identity(groups: Sequence[VariantGroup]) -> list:
    """Merge each identity's groups into one mixed set with the clean image once."""
    pooled: Dict[Any, VariantGroup] = {}
    for g in groups:
        if g.identity_id not in pooled:
            pooled[g.identity_id] = VariantGroup(g.identity_id, "mixed", 0,
                                                 (g.images[g.clean_index],), (g.labels[g.clean_index],))
        cur = pooled[g.identity_id]
        extra = [i for i in range(len(g.images)) if i != g.clean_index]
        pooled[g.identity_id] = VariantGroup(
            cur.identity_id, "mixed", 0,
            cur.images + tuple(g.images[i] for i in extra),
            cur.labels + tuple(g.labels[i] for i in extra),
        )
    return list(pooled.values())


# scorers ------------------------------------------------------------------

Scorer = Callable[[VariantGroup], np.ndarray]


def image_scorer(fn: Callable[[np.ndarray], float]) -> Scorer:
    def score(group):
        return np.array([fn(img) for img in group.images])
    return score


def proposed_scorer(model) -> Scorer:
    return image_scorer(lambda img: quality_score(model, img))


def dffs_scorer(eigen_model) -> Scorer:
    return image_scorer(lambda img: dffs_score(eigen_model, img))


def oracle_scorer(group: VariantGroup) -> np.ndarray:
    """Negated L1 distance to the group's clean image (cheats by construction)."""
    ref = group.images[group.clean_index]
    return np.array([-np.sum(np.abs(img - ref)) for img in group.images])


def severity_oracle_scorer(group: VariantGroup) -> np.ndarray:
    """Negated severity step read from the labels: 0 clean, -1 mildest, and so on.

    Unlike :func:`oracle_scorer` this ranks consistently across kinds, so it
    is the reference for mixed per-identity sets.
    """
    side = group.images[group.clean_index].shape[0]
    out = []
    for lab in group.labels:
        steps = sorted({V.severity(lab.kind, m, side) for m in V.preset_grid(lab.kind, side)})
        sev = V.severity(lab.kind, lab.magnitude, side)
        out.append(-float(np.searchsorted(steps, sev - 1e-12)))
    return np.array(out)


def constant_scorer(group: VariantGroup) -> np.ndarray:
    return np.zeros(len(group.images))


def _score_all(groups, scorer, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(scorer, groups))
    return [scorer(g) for g in groups]


# metrics ------------------------------------------------------------------

@dataclass(frozen=True)
class EvalReport:
    per_kind: Dict[str, float]
    counts: Dict[str, tuple]

    @property
    def overall(self):
        return float(np.mean(list(self.per_kind.values())))


def best_variant_accuracy(groups: Sequence[VariantGroup], scorer: Scorer, workers: int | None = None) -> EvalReport:
    """Percentage of groups whose clean image gets the strictly highest score.

    Ties count as failures. ``overall`` is the unweighted mean over kinds.
    """
    if not groups:
        raise ValueError("no variant groups to evaluate")
    all_scores = _score_all(groups, scorer, workers)
    hits: Dict[str, list] = {}
    for g, scores in zip(groups, all_scores):
        scores = np.asarray(scores, dtype=np.float64)
        clean = scores[g.clean_index]
        others = np.delete(scores, g.clean_index)
        ok = bool(np.all(clean > others))
        hits.setdefault(g.kind, []).append(ok)
    per_kind = {k: 100.0 * sum(v) / len(v) for k, v in hits.items()}
    counts = {k: (sum(v), len(v)) for k, v in hits.items()}
    return EvalReport(per_kind, counts)


def _is_clean_or_mild(label, side, mild):
    sev = V.severity(label.kind, label.magnitude, side)
    return sev == 0 or sev <= mild[label.kind] + 1e-12


def _mildest(kind, side):
    return min(s for s in (V.severity(kind, m, side) for m in V.preset_grid(kind, side)) if s > 0)


def subset_quality_curve(sets: Sequence[VariantGroup], scorer: Scorer, n_values: Sequence[int],
                         workers: int | None = None) -> list:
    """Fraction of top-N selected images that are clean or mildly degraded, per N.

    Fractions are pooled over all sets: selected clean-or-mild images
    divided by all selected images.
    """
    if not n_values:
        raise ValueError("n_values must not be empty")
    all_scores = _score_all(sets, scorer, workers)
    mild_cache = {}
    good_flags = []
    for s in sets:
        side = s.images[s.clean_index].shape[0]
        flags = []
        for lab in s.labels:
            if (lab.kind, side) not in mild_cache:
                mild_cache[lab.kind, side] = _mildest(lab.kind, side)
            flags.append(_is_clean_or_mild(lab, side, {lab.kind: mild_cache[lab.kind, side]}))
        good_flags.append(flags)
    rows = []
    for n in n_values:
        good = total = 0
        for flags, scores in zip(good_flags, all_scores):
            picked = select_top_n(rank_scores(scores), n).selected_ids
            good += sum(flags[i] for i in picked)
            total += len(picked)
        rows.append((int(n), good / total))
    return rows


# reports ------------------------------------------------------------------

KIND_LABELS = {
    V.HORIZONTAL_SHIFT: "HS",
    V.VERTICAL_SHIFT: "VS",
    V.ROTATION: "RT",
    V.SCALE: "SC",
    V.BLUR: "SH",
}


def accuracy_table(reports: Mapping[str, EvalReport]) -> str:
    """Plain-text table with one row per scorer and one column per kind."""
    kinds = [k for k in V.KINDS if any(k in r.per_kind for r in reports.values())]
    head = f"{'scorer':<10}" + "".join(f"{KIND_LABELS[k]:>8}" for k in kinds) + f"{'overall':>9}"
    lines = [head, "-" * len(head)]
    for name, rep in reports.items():
        cells = "".join(f"{rep.per_kind[k]:8.1f}" if k in rep.per_kind else f"{'-':>8}" for k in kinds)
        lines.append(f"{name:<10}{cells}{rep.overall:9.1f}")
    return "\n".join(lines) + "\n"


def accuracy_csv(reports: Mapping[str, EvalReport]) -> str:
    """CSV with header ``scorer,kind,successes,groups,accuracy_percent``.

    Each scorer contributes one row per kind plus an ``overall`` row whose
    successes/groups columns are totals.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scorer", "kind", "successes", "groups", "accuracy_percent"])
    for name, rep in reports.items():
        for kind, pct in rep.per_kind.items():
            hit, tot = rep.counts[kind]
            w.writerow([name, kind, hit, tot, repr(pct)])
        hit = sum(c[0] for c in rep.counts.values())
        tot = sum(c[1] for c in rep.counts.values())
        w.writerow([name, "overall", hit, tot, repr(rep.overall)])
    return buf.getvalue()


def curve_table(curves: Mapping[str, list]) -> str:
    names = list(curves)
    ns = [n for n, _ in curves[names[0]]]
    lines = [f"{'N':>4}" + "".join(f"{n:>12}" for n in names)]
    for i, n in enumerate(ns):
        lines.append(f"{n:>4}" + "".join(f"{curves[name][i][1]:12.4f}" for name in names))
    return "\n".join(lines) + "\n"


def curve_csv(curves: Mapping[str, list]) -> str:
    """CSV with header ``scorer,N,clean_or_mild_fraction``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scorer", "N", "clean_or_mild_fraction"])
    for name, rows in curves.items():
        for n, frac in rows:
            w.writerow([name, n, repr(frac)])
    return buf.getvalue()
