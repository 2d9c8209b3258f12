"""Key-object selection and per-object feature maps.

Raw segmentation masks are filtered by area thresholds to drop speckles and
the full-frame background, then each kept mask is resized to feature
resolution and multiplied element-wise into the upsampled feature map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateObjectError
from .interp import bilinear_resize
from .tensor_store import MaskPage

INTERIOR_THRESHOLD = 0.5  # resized soft mask counts as object where > 0.5


@dataclass
class ObjectRecord:
    """One query or reference object at feature resolution.

    ``feat`` is exactly the upsampled map times ``mask_hi`` (soft mask kept,
    per-channel broadcast); ``bbox_hi`` is the tight box over
    ``mask_hi > 0.5`` as (row_min, col_min, row_max, col_max) inclusive.
    """

    object_id: int
    mask_hi: np.ndarray  # (H, W) float in [0, 1]
    bbox_hi: tuple[int, int, int, int]
    feat: np.ndarray  # (C, H, W) float32, zero outside the mask


def filter_masks(masks: list[MaskPage], min_area: int, max_area: int) -> list[MaskPage]:
    """Keep masks whose pixel count lies in [min_area, max_area], in order."""
    if min_area > max_area:
        raise ConfigError(f"min_area {min_area} > max_area {max_area}")
    return [m for m in masks if min_area <= m.area <= max_area]


def area_bounds(image_hw: tuple[int, int], min_frac: float, max_frac: float) -> tuple[int, int]:
    """Translate area fractions from a category profile into pixel counts."""
    total = image_hw[0] * image_hw[1]
    return int(np.ceil(min_frac * total)), int(np.floor(max_frac * total))


def object_feature_maps(masks: list[MaskPage], up: np.ndarray) -> list[ObjectRecord]:
    """Resize each mask to the feature grid and mask the upsampled features.

    Raises DegenerateObjectError (naming the object index) when a mask
    vanishes at feature resolution, i.e. no resized value exceeds 0.5.
    """
    if up.ndim != 3:
        raise ConfigError(f"upsampled map must be (C, H, W), got {up.shape}")
    if not np.all(np.isfinite(up)):
        raise ConfigError("upsampled feature map contains non-finite values")
    out_hw = up.shape[1:]
    records = []
    for idx, page in enumerate(masks):
        mask_hi = bilinear_resize(page.mask.astype(np.float64), out_hw)
        interior = mask_hi > INTERIOR_THRESHOLD
        if not interior.any():
            raise DegenerateObjectError(
                f"object {idx} has an empty mask at feature resolution {out_hw}"
            )
        rows = np.flatnonzero(interior.any(axis=1))
        cols = np.flatnonzero(interior.any(axis=0))
        bbox = (int(rows[0]), int(cols[0]), int(rows[-1]), int(cols[-1]))
        feat = (up.astype(np.float64) * mask_hi[None, :, :]).astype(np.float32)
        records.append(
            ObjectRecord(object_id=idx, mask_hi=mask_hi, bbox_hi=bbox, feat=feat)
        )
    return records


def whole_frame_record(up: np.ndarray) -> ObjectRecord:
    """Single pseudo-object covering the full frame.

    Used for single-object scenes and as the fallback when area filtering
    leaves no key objects.
    """
    h, w = up.shape[1:]
    mask_hi = np.ones((h, w), dtype=np.float64)
    return ObjectRecord(
        object_id=0,
        mask_hi=mask_hi,
        bbox_hi=(0, 0, h - 1, w - 1),
        feat=np.asarray(up, dtype=np.float32).copy(),
    )
