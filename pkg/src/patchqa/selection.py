"""Ranking, top-N selection and threshold-based rejection of scored images."""
import math
from dataclasses import dataclass, replace
from typing import Any, Optional, Sequence

import numpy as np

from .model import ScoredImage

DEFAULT_REJECT_FRACTION = 0.05


@dataclass(frozen=True)
class SelectionResult:
    ordered_ids: tuple
    scores: tuple
    selected_ids: tuple
    threshold: Optional[float] = None

    @property
    def ranked(self):
        return [ScoredImage(i, s, rank=r) for r, (i, s) in enumerate(zip(self.ordered_ids, self.scores))]


def rank_by_quality(scored: Sequence[ScoredImage]) -> SelectionResult:
    """Stable descending sort by score; ties keep input order.

    Every image is initially selected. ``rank`` is set on the inputs.
    """
    for s in scored:
        if s.score is None or not math.isfinite(s.score):
            raise ValueError(f"image {s.image_id!r} has no finite score")
    order = sorted(range(len(scored)), key=lambda i: -scored[i].score)
    for r, i in enumerate(order):
        scored[i].rank = r
    ids = tuple(scored[i].image_id for i in order)
    return SelectionResult(ids, tuple(float(scored[i].score) for i in order), ids)


def rank_scores(scores: Sequence[float], ids: Optional[Sequence[Any]] = None) -> SelectionResult:
    ids = range(len(scores)) if ids is None else ids
    return rank_by_quality([ScoredImage(i, float(s)) for i, s in zip(ids, scores)])


def select_top_n(result: SelectionResult, n: int) -> SelectionResult:
    """Keep the ``n`` best images of the current selection."""
    if n < 1:
        raise ValueError(f"N must be at least 1, got {n}")
    return replace(result, selected_ids=result.selected_ids[:n])


def calibrate_threshold(training_scores: Sequence[float], reject_fraction: float = DEFAULT_REJECT_FRACTION) -> float:
    """Score below which an image is rejected as poor quality.

    The ``reject_fraction`` quantile of the reference scores, linearly
    interpolated between order statistics.
    """
    scores = np.asarray(training_scores, dtype=np.float64).reshape(-1)
    if scores.size == 0:
        raise ValueError("cannot calibrate a threshold from no scores")
    if not np.all(np.isfinite(scores)):
        raise ValueError("calibration scores must be finite")
    if not 0.0 <= reject_fraction < 1.0:
        raise ValueError(f"reject_fraction must lie in [0, 1), got {reject_fraction}")
    return float(np.quantile(scores, reject_fraction, method="linear"))


def select_above(result: SelectionResult, threshold: float) -> SelectionResult:
    """Keep images scoring at least ``threshold``."""
    kept = tuple(i for i, s in zip(result.ordered_ids, result.scores) if s >= threshold)
    return replace(result, selected_ids=kept, threshold=float(threshold))
