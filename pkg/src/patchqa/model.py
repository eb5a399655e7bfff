"""Location-specific Gaussian face model and the summed log-likelihood score."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Optional, Sequence

import numpy as np

from . import _accel, serialization
from .features import image_features
from .imagecore import PatchConfig, as_gray_image
from .serialization import ModelFormatError

LOG_2PI = math.log(2.0 * math.pi)
MODEL_FORMAT = "patchqa/quality-model"

DEFAULT_RIDGE = 1e-6
DEFAULT_RIDGE_FLOOR = 1e-10


def _factorize(cov):
    """Precision matrices and log-determinants of a stack of SPD matrices.

    Raises ``np.linalg.LinAlgError`` naming the first location that is not
    positive definite.
    """
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        for i, c in enumerate(cov):
            try:
                np.linalg.cholesky(c)
            except np.linalg.LinAlgError:
                raise np.linalg.LinAlgError(f"covariance at location {i} is not positive definite") from None
        raise
    eye = np.broadcast_to(np.eye(cov.shape[-1]), cov.shape)
    chol_inv = np.linalg.solve(chol, eye)
    prec = np.swapaxes(chol_inv, -1, -2) @ chol_inv
    prec = 0.5 * (prec + np.swapaxes(prec, -1, -2))
    log_det = 2.0 * np.sum(np.log(np.diagonal(chol, axis1=-2, axis2=-1)), axis=-1)
    return prec, log_det


@dataclass(frozen=True)
class LocationGaussian:
    """Normal model of the feature vector at one patch location."""

    mean: np.ndarray
    covariance: np.ndarray
    precision: np.ndarray
    log_det: float

    @classmethod
    def from_covariance(cls, mean, covariance):
        mean = np.asarray(mean, dtype=np.float64).reshape(-1)
        cov = np.asarray(covariance, dtype=np.float64)
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"covariance shape {cov.shape} does not match mean of length {mean.size}")
        prec, log_det = _factorize(cov[None])
        return cls(mean, cov, prec[0], float(log_det[0]))

    @property
    def dim(self):
        return self.mean.size


def log_density(g: LocationGaussian, x) -> float:
    """Natural log of the multivariate normal density of ``x`` under ``g``."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != g.dim:
        raise ValueError(f"feature length {x.size} does not match model dimension {g.dim}")
    diff = x - g.mean
    maha = float(diff @ g.precision @ diff)
    return -0.5 * g.dim * LOG_2PI - 0.5 * g.log_det - 0.5 * maha


def _location_log_densities_numpy(feats, means, precs, log_dets):
    d = means.shape[1]
    diff = feats - means
    maha = np.einsum("ni,nij,nj->n", diff, precs, diff)
    return -0.5 * d * LOG_2PI - 0.5 * log_dets - 0.5 * maha


def _location_log_densities_loops(feats, means, precs, log_dets):
    n, d = means.shape
    out = np.empty(n)
    const = -0.5 * d * LOG_2PI
    diff = np.empty(d)
    for i in range(n):
        for a in range(d):
            diff[a] = feats[i, a] - means[i, a]
        maha = 0.0
        for a in range(d):
            acc = 0.0
            for b in range(d):
                acc += precs[i, a, b] * diff[b]
            maha += diff[a] * acc
        out[i] = const - 0.5 * log_dets[i] - 0.5 * maha
    return out


_location_log_densities_numba = _accel.njit(_location_log_densities_loops)


@dataclass(frozen=True, eq=False)
class QualityModel:
    """Grid of per-location Gaussians plus the preprocessing that produced them.

    Parameters are stored as stacked arrays in row-major grid order; use
    :meth:`gaussian` or :attr:`gaussians` for per-location views.
    """

    patch_config: PatchConfig
    image_side: int
    d: int
    means: np.ndarray
    covariances: np.ndarray
    precisions: np.ndarray
    log_dets: np.ndarray
    training_meta: dict = field(default_factory=dict)

    @classmethod
    def from_parameters(cls, patch_config, image_side, means, covariances, training_meta=None):
        """Build a model from means and covariances, validating every invariant."""
        means = np.ascontiguousarray(means, dtype=np.float64)
        covs = np.ascontiguousarray(covariances, dtype=np.float64)
        if means.ndim != 2:
            raise ValueError("means must have shape (N, d)")
        n_loc, d = means.shape
        expected = patch_config.count((image_side, image_side))
        if n_loc != expected:
            raise ValueError(f"model has {n_loc} locations, configuration implies {expected}")
        if covs.shape != (n_loc, d, d):
            raise ValueError(f"covariances have shape {covs.shape}, expected {(n_loc, d, d)}")
        if not (np.all(np.isfinite(means)) and np.all(np.isfinite(covs))):
            raise ValueError("model parameters must be finite")
        scale = np.maximum(1.0, np.max(np.abs(covs), axis=(1, 2)))
        asym = np.max(np.abs(covs - np.swapaxes(covs, 1, 2)), axis=(1, 2))
        if np.any(asym > 1e-12 * scale):
            raise ValueError(f"covariance at location {int(np.argmax(asym / scale))} is not symmetric")
        prec, log_dets = _factorize(covs)
        resid = np.max(np.abs(covs @ prec - np.eye(d)), axis=(1, 2))
        if np.any(resid > 1e-8) or not np.all(np.isfinite(log_dets)):
            raise ValueError(f"covariance at location {int(np.argmax(resid))} is numerically singular")
        for arr in (means, covs, prec, log_dets):
            arr.setflags(write=False)
        return cls(patch_config, int(image_side), int(d), means, covs, prec, log_dets, dict(training_meta or {}))

    @property
    def n_locations(self):
        return self.means.shape[0]

    def gaussian(self, i) -> LocationGaussian:
        return LocationGaussian(self.means[i], self.covariances[i], self.precisions[i], float(self.log_dets[i]))

    @property
    def gaussians(self):
        return tuple(self.gaussian(i) for i in range(self.n_locations))


def train(images: Sequence, cfg: PatchConfig = PatchConfig(), d: int = 3, ridge: float = DEFAULT_RIDGE,
          ridge_floor: float = DEFAULT_RIDGE_FLOOR, created: Optional[str] = None) -> QualityModel:
    """Fit one Gaussian per patch location to aligned square training faces.

    Each location's covariance is the unbiased sample covariance plus
    ``eps * I`` with ``eps = max(ridge * trace / d, ridge_floor)``.
    """
    images = list(images)
    if len(images) < d + 2:
        raise ValueError(f"need at least d + 2 = {d + 2} training images, got {len(images)}")
    if ridge < 0 or ridge_floor <= 0:
        raise ValueError("ridge must be >= 0 and ridge_floor > 0")
    first = as_gray_image(images[0])
    side = first.shape[0]
    if first.shape != (side, side):
        raise ValueError(f"training images must be square, got {first.shape}")

    # Welford accumulation keeps memory at O(N d^2) for any number of images
    mean = None
    m2 = None
    for k, img in enumerate(images, start=1):
        arr = as_gray_image(img)
        if arr.shape != (side, side):
            raise ValueError(f"training image {k - 1} has shape {arr.shape}, expected {(side, side)}")
        x = image_features(arr, cfg, d)
        if not np.all(np.isfinite(x)):
            raise ValueError(f"training image {k - 1} produced non-finite features")
        if mean is None:
            mean = np.zeros_like(x)
            m2 = np.zeros((x.shape[0], d, d))
        delta = x - mean
        mean += delta / k
        m2 += delta[:, :, None] * (x - mean)[:, None, :]

    m = len(images)
    cov = m2 / (m - 1)
    cov = 0.5 * (cov + np.swapaxes(cov, 1, 2))
    eps = np.maximum(ridge * np.trace(cov, axis1=1, axis2=2) / d, ridge_floor)
    cov += eps[:, None, None] * np.eye(d)

    meta = {
        "samples": m,
        "ridge": ridge,
        "ridge_floor": ridge_floor,
        "created": created if created is not None else datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    return QualityModel.from_parameters(cfg, side, mean, cov, meta)


def _check_image(model, img):
    arr = as_gray_image(img)
    if arr.shape != (model.image_side, model.image_side):
        raise ValueError(f"image has shape {arr.shape}, model expects {(model.image_side,) * 2}")
    return arr


def location_log_densities(model: QualityModel, feats) -> np.ndarray:
    """Per-location log densities for a ``(N, d)`` feature matrix."""
    feats = np.ascontiguousarray(feats, dtype=np.float64)
    if feats.shape != model.means.shape:
        raise ValueError(f"features have shape {feats.shape}, model expects {model.means.shape}")
    if _accel.USE_NUMBA:
        return _location_log_densities_numba(feats, model.means, model.precisions, model.log_dets)
    return _location_log_densities_numpy(feats, model.means, model.precisions, model.log_dets)


def quality_score(model: QualityModel, img) -> float:
    """Sum of per-location feature log densities. Higher is better quality.

    ``img`` must already be ``image_side`` x ``image_side``; no resizing
    happens here.
    """
    arr = _check_image(model, img)
    feats = image_features(arr, model.patch_config, model.d)
    return float(np.sum(location_log_densities(model, feats)))


@dataclass
class ScoredImage:
    image_id: Any
    score: Optional[float]
    rank: Optional[int] = None
    error: Optional[str] = None

    @property
    def ok(self):
        return self.error is None


def score_batch(model: QualityModel, images: Sequence, ids: Optional[Sequence] = None,
                workers: Optional[int] = None) -> list:
    """Score many images; a failing image yields ``score=None`` and an ``error``.

    Output order matches input order regardless of ``workers``.
    """
    images = list(images)
    ids = list(range(len(images))) if ids is None else list(ids)
    if len(ids) != len(images):
        raise ValueError("ids and images differ in length")

    def one(pair):
        image_id, img = pair
        try:
            return ScoredImage(image_id, quality_score(model, img))
        except (ValueError, np.linalg.LinAlgError) as exc:
            return ScoredImage(image_id, None, error=str(exc))

    pairs = list(zip(ids, images))
    if workers and workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, pairs))
    return [one(p) for p in pairs]


def save_model(model: QualityModel) -> bytes:
    body = {
        "image_side": model.image_side,
        "patch_size": model.patch_config.size,
        "overlap": model.patch_config.overlap,
        "d": model.d,
        "N": model.n_locations,
        "training_meta": model.training_meta,
        "locations": [
            {"mean": mu.tolist(), "covariance": cov.reshape(-1).tolist()}
            for mu, cov in zip(model.means, model.covariances)
        ],
    }
    return serialization.encode(MODEL_FORMAT, body)


def load_model(data) -> QualityModel:
    """Parse a model stream, re-deriving and checking every cached quantity."""
    doc = serialization.decode(data, MODEL_FORMAT)
    f = serialization.field
    try:
        cfg = PatchConfig(f(doc, "patch_size", int), f(doc, "overlap", int))
        side, d, n_loc = f(doc, "image_side", int), f(doc, "d", int), f(doc, "N", int)
        locs = f(doc, "locations")
        if not isinstance(locs, list) or len(locs) != n_loc:
            raise ModelFormatError(f"expected {n_loc} location records")
        means = np.array([loc["mean"] for loc in locs], dtype=np.float64).reshape(n_loc, d)
        covs = np.array([loc["covariance"] for loc in locs], dtype=np.float64).reshape(n_loc, d, d)
        meta = f(doc, "training_meta")
        if not isinstance(meta, dict):
            raise ModelFormatError("training_meta must be an object")
        return QualityModel.from_parameters(cfg, side, means, covs, meta)
    except ModelFormatError:
        raise
    except (ValueError, TypeError, KeyError, np.linalg.LinAlgError) as exc:
        raise ModelFormatError(f"invalid model: {exc}") from None


def write_model(model: QualityModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(save_model(model))


def read_model(path) -> QualityModel:
    with open(path, "rb") as fh:
        return load_model(fh.read())
