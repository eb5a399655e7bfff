"""Patch-based probabilistic face image quality assessment."""
from .imagecore import PatchConfig, extract_patches, log_normalize, normalize_patch
from .features import dct2, idct2, image_features, select_low_freq
from .model import (
    LocationGaussian,
    QualityModel,
    ScoredImage,
    load_model,
    log_density,
    quality_score,
    save_model,
    score_batch,
    train,
)
from .selection import SelectionResult, calibrate_threshold, rank_by_quality, select_top_n
from .dffs import EigenfaceModel, dffs_score, train_pca

__version__ = "0.1.0"
