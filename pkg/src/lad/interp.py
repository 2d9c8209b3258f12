"""Bilinear resampling helpers shared by the mask, crop, and paste paths.

Pixel (i, j) of an H x W grid is treated as a sample at (i + 0.5, j + 0.5);
sampling outside the grid clamps to the edge, so all weights stay
non-negative and outputs are convex combinations of inputs.
"""

from __future__ import annotations

import numpy as np


def sample_coords(out_len: int, in_len: int) -> np.ndarray:
    """Continuous source coordinates for resizing ``in_len`` -> ``out_len``."""
    return (np.arange(out_len, dtype=np.float64) + 0.5) * (in_len / out_len) - 0.5


def bilinear_sample(grid: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Sample ``grid`` (..., H, W) at continuous positions.

    ``ys`` and ``xs`` must broadcast against each other; the result has
    shape (..., *broadcast(ys, xs)). Coordinates are clamped to the grid.
    """
    h, w = grid.shape[-2:]
    ys, xs = np.broadcast_arrays(np.asarray(ys, np.float64), np.asarray(xs, np.float64))

    y0 = np.clip(np.floor(ys), 0, h - 1).astype(np.intp)
    x0 = np.clip(np.floor(xs), 0, w - 1).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)
    wx = np.clip(xs - x0, 0.0, 1.0)

    g = grid.astype(np.float64, copy=False)
    top = g[..., y0, x0] * (1.0 - wx) + g[..., y0, x1] * wx
    bot = g[..., y1, x0] * (1.0 - wx) + g[..., y1, x1] * wx
    return top * (1.0 - wy) + bot * wy


def bilinear_resize(grid: np.ndarray, out_hw: tuple[int, int]) -> np.ndarray:
    """Resize ``grid`` (..., H, W) to (..., out_h, out_w), float64 output."""
    out_h, out_w = out_hw
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output size must be positive, got {out_hw}")
    if grid.shape[-2:] == (out_h, out_w):
        return grid.astype(np.float64, copy=True)
    ys = sample_coords(out_h, grid.shape[-2])
    xs = sample_coords(out_w, grid.shape[-1])
    return bilinear_sample(grid, ys[:, None], xs[None, :])


def mean_filter_3x3(grid: np.ndarray) -> np.ndarray:
    """3x3 box filter with edge replication; fixed summation order."""
    padded = np.pad(grid.astype(np.float64, copy=False), 1, mode="edge")
    acc = np.zeros_like(grid, dtype=np.float64)
    h, w = grid.shape
    for dy in range(3):
        for dx in range(3):
            acc += padded[dy : dy + h, dx : dx + w]
    return acc / 9.0
