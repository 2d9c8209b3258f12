"""Image-level AUROC and pixel-level saturated per-region overlap (sPRO).

Both metrics are rank statistics: they sweep exact unique score values
rather than histogram bins, so they are invariant under strictly monotonic
transforms of the scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError


@dataclass(frozen=True)
class GtRegion:
    """One ground-truth anomaly region with its saturation threshold.

    Overlap credit saturates once ``saturation_area`` pixels of the region
    are covered; the synthetic suite uses the full region area.
    """

    mask: np.ndarray  # bool (H, W), non-empty
    saturation_area: int

    def __post_init__(self) -> None:
        area = int(np.count_nonzero(self.mask))
        if area == 0:
            raise DataError("ground-truth region is empty")
        if not 0 < self.saturation_area <= area:
            raise DataError(
                f"saturation_area {self.saturation_area} outside 1..{area}"
            )


def auroc(scores, labels) -> float:
    """Area under the ROC curve, rank-based with 1/2 credit for ties."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise DataError("scores and labels must be equal-length 1-D sequences")
    if not np.all(np.isin(y, (0, 1))):
        raise DataError("labels must be 0 or 1")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUROC needs at least one positive and one negative label")
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(s.size, dtype=np.float64)
    sorted_scores = s[order]
    i = 0
    while i < s.size:  # average ranks across tie groups
        j = i
        while j + 1 < s.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _counts_at(sorted_vals: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """Number of values >= t for each threshold; sorted_vals ascending."""
    return sorted_vals.size - np.searchsorted(sorted_vals, thresholds, side="left")


def spro(maps, regions_per_image: list[list[GtRegion]], fpr_cap: float = 0.05) -> float:
    """Mean saturated per-region overlap integrated over FPR in [0, fpr_cap].

    ``maps`` holds one score grid (or AnomalyMap) per image and
    ``regions_per_image`` the matching ground-truth regions (empty list for
    normal images; their pixels still count as normal for the FPR). The
    sweep visits every unique score value descending; the resulting curve
    is integrated by trapezoid over the points with FPR <= fpr_cap,
    extended at constant height to the cap, and normalized by the cap.
    """
    if not 0 < fpr_cap <= 1:
        raise ConfigError(f"fpr_cap must be in (0, 1], got {fpr_cap}")
    if len(maps) != len(regions_per_image):
        raise DataError("need one region list per map")

    region_scores: list[np.ndarray] = []
    saturations: list[int] = []
    normal_parts = []
    all_parts = []
    for m, regions in zip(maps, regions_per_image):
        grid = np.asarray(getattr(m, "scores", m), dtype=np.float64)
        normal = np.ones(grid.shape, dtype=bool)
        for region in regions:
            if region.mask.shape != grid.shape:
                raise DataError(
                    f"region shape {region.mask.shape} != map shape {grid.shape}"
                )
            region_scores.append(np.sort(grid[region.mask]))
            saturations.append(region.saturation_area)
            normal &= ~region.mask
        normal_parts.append(grid[normal])
        all_parts.append(grid.reshape(-1))
    if not region_scores:
        raise DataError("sPRO needs at least one ground-truth region")
    normal_scores = np.sort(np.concatenate(normal_parts))
    if normal_scores.size == 0:
        raise DataError("sPRO needs at least one normal pixel for the FPR")

    thresholds = np.unique(np.concatenate(all_parts))[::-1]
    mean_sat = np.zeros(thresholds.size)
    for rs, sat in zip(region_scores, saturations):
        mean_sat += np.minimum(_counts_at(rs, thresholds) / sat, 1.0)
    mean_sat /= len(region_scores)
    fpr = _counts_at(normal_scores, thresholds) / normal_scores.size

    # anchor at (0, 0): above the max score nothing is predicted
    fpr = np.concatenate([[0.0], fpr])
    mean_sat = np.concatenate([[0.0], mean_sat])

    within = fpr <= fpr_cap
    fx = fpr[within]
    fy = mean_sat[within]
    area = float(np.trapezoid(fy, fx)) if fx.size > 1 else 0.0
    area += float(fy[-1]) * (fpr_cap - float(fx[-1]))  # constant extension
    return area / fpr_cap
