"""Joint bilateral upsampling of backbone feature maps.

Restores spatial resolution lost by patch-based feature extraction: each
hi-res output cell is a convex combination of nearby low-res feature cells,
weighted by a spatial Gaussian and a Gaussian on the guide-image color
difference, so feature boundaries snap to image edges.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError, DataError
from .interp import bilinear_sample, sample_coords


def _check_guide(guide: np.ndarray) -> None:
    if guide.ndim != 3 or guide.shape[0] != 3:
        raise DataError(f"guide must be (3, H, W), got {guide.shape}")
    if guide.min() < -1e-6 or guide.max() > 1.0 + 1e-6:
        raise DataError("guide values must lie in [0, 1]")


def jbu_upsample(
    low: np.ndarray,
    guide: np.ndarray,
    factor: int,
    sigma_spatial: float = 1.0,
    sigma_range: float = 0.15,
) -> np.ndarray:
    """Upsample ``low`` (C, h, w) by ``factor`` guided by ``guide`` (3, H, W).

    The kernel covers the K x K nearest low-res cells with
    K = 2 * ceil(2 * sigma_spatial) + 1. Per output cell the weights are

        exp(-d_spatial^2 / (2 sigma_spatial^2)) *
        exp(-||g_hi - g_cell||^2 / (2 sigma_range^2))

    renormalized to sum to 1, where g_cell is the guide bilinearly sampled
    at the low-res cell center. Borders clamp to the edge. Output values of
    each channel stay within [min(low), max(low)] of that channel.
    """
    if factor < 1:
        raise ConfigError(f"factor must be >= 1, got {factor}")
    if sigma_spatial <= 0 or sigma_range <= 0:
        raise ConfigError("sigmas must be positive")
    if low.ndim != 3:
        raise DataError(f"low-res map must be (C, h, w), got {low.shape}")
    _check_guide(guide)
    c, h, w = low.shape
    out_h, out_w = factor * h, factor * w
    if guide.shape[1] != out_h or guide.shape[2] != out_w:
        raise DataError(
            f"guide is {guide.shape[1]}x{guide.shape[2]}, "
            f"expected {out_h}x{out_w} (= factor * low size)"
        )

    radius = math.ceil(2.0 * sigma_spatial)

    # low-res continuous position of every hi-res pixel, and its nearest cell
    ly = sample_coords(out_h, h)  # (out_h,)
    lx = sample_coords(out_w, w)
    cy = np.rint(ly).astype(np.intp)
    cx = np.rint(lx).astype(np.intp)

    # guide sampled at the low-res cell centers, shape (3, h, w)
    gy = sample_coords(h, out_h)
    gx = sample_coords(w, out_w)
    guide64 = guide.astype(np.float64, copy=False)
    g_low = bilinear_sample(guide64, gy[:, None], gx[None, :])

    low64 = low.astype(np.float64, copy=False)
    g_hi = guide64  # guide is already at output resolution

    inv2ss = 1.0 / (2.0 * sigma_spatial * sigma_spatial)
    inv2sr = 1.0 / (2.0 * sigma_range * sigma_range)

    offsets = [(dy, dx) for dy in range(-radius, radius + 1)
               for dx in range(-radius, radius + 1)]

    # pass 1: per-cell minimum exponent, so exp() never underflows to an
    # all-zero weight set (the shift cancels in the normalization)
    min_exp = np.full((out_h, out_w), np.inf)
    exps = []
    for dy, dx in offsets:
        ty = cy + dy  # nominal tap positions; distance uses these
        tx = cx + dx
        jj = np.clip(ty, 0, h - 1)  # clamp-to-edge for values and guide
        ii = np.clip(tx, 0, w - 1)
        d2 = (ty - ly)[:, None] ** 2 + ((tx - lx)[None, :]) ** 2
        gdiff = g_hi - g_low[:, jj[:, None], ii[None, :]]
        r2 = np.einsum("cij,cij->ij", gdiff, gdiff)
        e = d2 * inv2ss + r2 * inv2sr
        exps.append((jj, ii, e))
        np.minimum(min_exp, e, out=min_exp)

    num = np.zeros((c, out_h, out_w))
    den = np.zeros((out_h, out_w))
    for jj, ii, e in exps:
        wgt = np.exp(min_exp - e)
        den += wgt
        num += wgt[None, :, :] * low64[:, jj[:, None], ii[None, :]]
    return (num / den[None, :, :]).astype(np.float32)
