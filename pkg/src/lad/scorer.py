"""Anomaly measurement: per-position Gaussian models and Mahalanobis maps.

Matched objects live at different image locations, so each object's
bbox-cropped feature map is first resized to a fixed R x R canonical grid.
A per-cell Gaussian (mean + covariance over the k reference crops) then
scores the query crop cell-wise; the resulting map is pasted back into the
object's bounding box, masked, and summed with the other objects' maps.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .interp import bilinear_resize, mean_filter_3x3
from .matcher import Assignment
from .scene_objects import ObjectRecord

LOGGER = logging.getLogger(__name__)

COV_MODES = ("diag", "full")
REDUCTIONS = ("max", "mean_topq")
BOTH_SETS = ("matched", "unmatched")


@dataclass
class ScoreParams:
    """Anomaly measurement configuration."""

    r_grid: int = 32  # canonical crop resolution
    epsilon: float = 0.01  # covariance regularizer
    cov_mode: str = "diag"
    channel_subsample: int = 64  # full mode only; seeded channel choice
    out_hw: tuple[int, int] | None = None  # final map resolution (default: feature grid)
    reduction: str = "max"
    top_q: float = 0.01  # fraction used by mean_topq
    seed: int = 0

    def __post_init__(self) -> None:
        if self.r_grid < 2:
            raise ConfigError("canonical grid must be at least 2x2")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if self.cov_mode not in COV_MODES:
            raise ConfigError(f"cov_mode must be one of {COV_MODES}")
        if self.reduction not in REDUCTIONS:
            raise ConfigError(f"reduction must be one of {REDUCTIONS}")
        if not 0 < self.top_q <= 1:
            raise ConfigError("top_q must be in (0, 1]")


@dataclass(frozen=True)
class CanonicalCrop:
    """Object bbox crop resized to a fixed R x R grid, (R, R, C) layout."""

    grid: np.ndarray
    source_bbox: tuple[int, int, int, int]


@dataclass
class GaussianField:
    """Per-cell Gaussian over k reference crops.

    ``cov`` is (R, R, C) variances in diag mode or (R, R, C, C) matrices in
    full mode; every variance / covariance eigenvalue is at least epsilon.
    ``channels`` records the channel subset used (None = all channels).
    """

    mean: np.ndarray  # (R, R, C)
    cov: np.ndarray
    epsilon: float
    k: int
    mode: str = "diag"
    channels: np.ndarray | None = None


@dataclass
class AnomalyMap:
    """Final non-negative score grid plus its image-level reduction."""

    scores: np.ndarray  # (H, W) >= 0
    image_score: float
    smoothed: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]


def canonical_crop(record: ObjectRecord, r_grid: int) -> CanonicalCrop:
    """Resize the object's bbox-cropped masked features to r_grid x r_grid."""
    if r_grid < 2:
        raise ConfigError("canonical grid must be at least 2x2")
    r0, c0, r1, c1 = record.bbox_hi
    if r1 < r0 or c1 < c0:
        raise DataError(f"degenerate bbox {record.bbox_hi}")
    patch = record.feat[:, r0 : r1 + 1, c0 : c1 + 1]
    resized = bilinear_resize(patch, (r_grid, r_grid))  # (C, R, R)
    return CanonicalCrop(
        grid=np.moveaxis(resized, 0, -1).copy(), source_bbox=record.bbox_hi
    )


def estimate_gaussian_field(
    crops: list[CanonicalCrop],
    epsilon: float,
    mode: str = "diag",
    channels: np.ndarray | None = None,
) -> GaussianField:
    """Per-cell sample mean and (regularized) covariance over the crops.

    Accumulation runs in float64. Diag mode keeps only per-channel
    variances; full mode adds epsilon * I to the sample covariance so it is
    always invertible.
    """
    k = len(crops)
    if k < 2:
        raise DataError(f"need at least 2 crops to estimate a field, got {k}")
    if epsilon <= 0:
        raise ConfigError("epsilon must be positive")
    if mode not in COV_MODES:
        raise ConfigError(f"mode must be one of {COV_MODES}")
    shape = crops[0].grid.shape
    for crop in crops[1:]:
        if crop.grid.shape != shape:
            raise DataError("all crops must share one canonical shape")
    data = np.stack([c.grid for c in crops]).astype(np.float64)  # (k, R, R, C)
    if channels is not None:
        data = data[..., channels]
    mean = data.mean(axis=0)
    dev = data - mean[None]
    if mode == "diag":
        cov = (dev * dev).sum(axis=0) / (k - 1) + epsilon
    else:
        cov = np.einsum("krsa,krsb->rsab", dev, dev) / (k - 1)
        cov += epsilon * np.eye(data.shape[-1])
    return GaussianField(
        mean=mean, cov=cov, epsilon=epsilon, k=k, mode=mode, channels=channels
    )


def mahalanobis_map(query: CanonicalCrop, fld: GaussianField) -> np.ndarray:
    """Per-cell Mahalanobis distance of the query crop from the field.

    Full mode factorizes each per-cell covariance (Cholesky; guaranteed to
    succeed by the epsilon floor) and solves the triangular system; diag
    mode divides element-wise. Output is (R, R), non-negative and finite.
    """
    grid = query.grid.astype(np.float64)
    if fld.channels is not None:
        grid = grid[..., fld.channels]
    if grid.shape != fld.mean.shape:
        raise DataError(
            f"query crop shape {grid.shape} does not match field {fld.mean.shape}"
        )
    dev = grid - fld.mean
    if fld.mode == "diag":
        m2 = (dev * dev / fld.cov).sum(axis=-1)
    else:
        chol = np.linalg.cholesky(fld.cov)  # (R, R, C, C)
        y = np.linalg.solve(chol, dev[..., None])[..., 0]
        m2 = (y * y).sum(axis=-1)
    return np.sqrt(np.maximum(m2, 0.0))


def _squared_error_map(query: CanonicalCrop, ref: CanonicalCrop) -> np.ndarray:
    diff = query.grid.astype(np.float64) - ref.grid.astype(np.float64)
    return (diff * diff).sum(axis=-1)


def _pick_channels(n_channels: int, params: ScoreParams) -> np.ndarray | None:
    if params.cov_mode != "full" or n_channels <= params.channel_subsample:
        return None
    rng = np.random.default_rng(params.seed)
    return np.sort(rng.choice(n_channels, size=params.channel_subsample, replace=False))


def _reduce(smoothed: np.ndarray, params: ScoreParams) -> float:
    if params.reduction == "max":
        return float(smoothed.max())
    count = max(1, int(np.ceil(params.top_q * smoothed.size)))
    top = np.sort(smoothed.reshape(-1))[-count:]
    return float(top.mean())


def score_objects(
    assignments: list[Assignment],
    query_records: list[ObjectRecord],
    reference_records: list[list[ObjectRecord]],
    params: ScoreParams,
    sets: tuple[str, ...] = BOTH_SETS,
) -> AnomalyMap:
    """Fuse per-object Mahalanobis maps into the final anomaly map.

    A query object counts as matched when at least one of the k per-reference
    assignments matched it; its reference crop in each assignment is the
    matched partner there, or the nearest-reference hint when that
    assignment left it unmatched. Matched and unmatched contributions are
    summed (overlaps add); ``sets`` restricts which contributions are kept,
    which is how the lightweight mode and the additivity identity are
    expressed.
    """
    if len(assignments) < 2:
        raise DataError("need at least 2 reference assignments")
    if len(assignments) != len(reference_records):
        raise DataError("one reference record list required per assignment")
    for name in sets:
        if name not in BOTH_SETS:
            raise ConfigError(f"unknown contribution set {name!r}")
    if not query_records:
        raise DataError("no query objects to score")

    hi_hw = query_records[0].feat.shape[1:]
    channels = _pick_channels(query_records[0].feat.shape[0], params)
    canvases = {name: np.zeros(hi_hw) for name in BOTH_SETS}

    for i, rec in enumerate(query_records):
        is_matched = any(a.matched_ref_of(i) is not None for a in assignments)
        label = "matched" if is_matched else "unmatched"
        if label not in sets:
            continue
        crops = []
        for asg, refs in zip(assignments, reference_records):
            if not refs:
                continue
            crops.append(canonical_crop(refs[asg.nearest_ref_of(i)], params.r_grid))
        qcrop = canonical_crop(rec, params.r_grid)
        if len(crops) >= 2:
            fld = estimate_gaussian_field(
                crops, params.epsilon, params.cov_mode, channels
            )
            omap = mahalanobis_map(qcrop, fld)
        elif len(crops) == 1:
            LOGGER.warning(
                "object %d has a single reference crop; falling back to "
                "squared error against it",
                i,
            )
            omap = _squared_error_map(qcrop, crops[0])
        else:
            LOGGER.warning("object %d has no reference crops; contributes zero", i)
            continue
        r0, c0, r1, c1 = rec.bbox_hi
        box_hw = (r1 - r0 + 1, c1 - c0 + 1)
        patch = bilinear_resize(omap, box_hw) * rec.mask_hi[r0 : r1 + 1, c0 : c1 + 1]
        canvases[label][r0 : r1 + 1, c0 : c1 + 1] += patch

    fused = np.zeros(hi_hw)
    for name in sets:
        fused += canvases[name]
    out_hw = params.out_hw or hi_hw
    final = bilinear_resize(fused, out_hw)
    smoothed = mean_filter_3x3(final)
    return AnomalyMap(
        scores=final, image_score=_reduce(smoothed, params), smoothed=smoothed
    )


def lightweight_fuse(
    assignments: list[Assignment],
    query_records: list[ObjectRecord],
    reference_records: list[list[ObjectRecord]],
    params: ScoreParams,
) -> AnomalyMap:
    """Non-matching contributions only; matched objects contribute zero."""
    return score_objects(
        assignments, query_records, reference_records, params, sets=("unmatched",)
    )
