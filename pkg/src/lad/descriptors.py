"""Object descriptors via dynamic channel-graph attention (DCGA).

Each object's masked feature map is pooled to a single C-vector, reweighted
along the channel axis by a softmax attention derived from a 1-D
convolution, and mixed across objects through a cosine-similarity graph.
Plain GMP/GAP descriptors remain selectable for the pooling ablation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, DegenerateDescriptorError
from .scene_objects import INTERIOR_THRESHOLD, ObjectRecord

POOL_MODES = ("gmp", "gap")
VARIANTS = ("literal", "gated", "none")


@dataclass
class DcgaParams:
    """Descriptor configuration.

    ``kernel`` is the odd-length 1-D convolution applied along the channel
    axis before the softmax; ``variant`` selects how the attention gates the
    pooled features ("none" skips the graph entirely, leaving normalized
    pooled vectors for the GMP/GAP ablation rows).
    """

    kernel: np.ndarray = field(default_factory=lambda: np.full(3, 1.0 / 3.0))
    pool_mode: str = "gmp"
    variant: str = "gated"
    temperature: float = 1.0
    center: bool = True

    def __post_init__(self) -> None:
        self.kernel = np.asarray(self.kernel, dtype=np.float64)
        if self.kernel.ndim != 1 or self.kernel.size % 2 == 0:
            raise ConfigError(f"kernel must be 1-D with odd length, got {self.kernel.shape}")
        if self.pool_mode not in POOL_MODES:
            raise ConfigError(f"pool_mode must be one of {POOL_MODES}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}")
        if not self.temperature > 0:
            raise ConfigError("temperature must be positive")


@dataclass(frozen=True)
class PooledFeatures:
    """M x C matrix, one pooled row per object."""

    f_in: np.ndarray


@dataclass(frozen=True)
class DescriptorSet:
    """M x C matrix of unit-L2-norm object descriptor rows."""

    d: np.ndarray

    def __post_init__(self) -> None:
        norms = np.linalg.norm(self.d, axis=1)
        if not np.allclose(norms, 1.0, atol=1e-6):
            raise DataError("descriptor rows must be unit norm")


def pool_objects(records: list[ObjectRecord], mode: str = "gmp") -> PooledFeatures:
    """Pool each object's feature map over its mask interior to one row."""
    if not records:
        raise DataError("need at least one object record")
    if mode not in POOL_MODES:
        raise ConfigError(f"pool mode must be one of {POOL_MODES}")
    rows = []
    for rec in records:
        interior = rec.mask_hi > INTERIOR_THRESHOLD
        if not interior.any():
            raise DataError(f"object {rec.object_id} has an empty mask interior")
        vals = rec.feat[:, interior].astype(np.float64)  # (C, n_interior)
        rows.append(vals.max(axis=1) if mode == "gmp" else vals.mean(axis=1))
    f_in = np.stack(rows)
    if not np.all(np.isfinite(f_in)):
        raise DataError("pooled features contain non-finite values")
    return PooledFeatures(f_in=f_in)


def _conv1d_edge(row: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Sliding dot product along the channel axis, clamp-to-edge padding."""
    half = kernel.size // 2
    padded = np.pad(row.astype(np.float64), half, mode="edge")
    out = np.zeros(row.size)
    for j, kj in enumerate(kernel):
        out += kj * padded[j : j + row.size]
    return out


def _softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max()
    e = np.exp(shifted)
    return e / e.sum()


def channel_weights(row: np.ndarray, params: DcgaParams) -> np.ndarray:
    """Softmax channel attention for one pooled object row (sums to 1)."""
    if not np.all(np.isfinite(row)):
        raise DataError("pooled row contains non-finite values")
    return _softmax(_conv1d_edge(row, params.kernel) / params.temperature)


def channel_adjacency(row: np.ndarray, params: DcgaParams) -> np.ndarray:
    """C x C channel adjacency: normalized identity times attention diagonal.

    Entries are a_i / C on the diagonal, zero elsewhere; the trace is 1/C.
    """
    a = channel_weights(row, params)
    return np.diag(a / row.size)


def object_adjacency(f_in: PooledFeatures) -> np.ndarray:
    """M x M cross-object mixing matrix from cosine similarities.

    Negative similarities clamp to 0, the diagonal is exactly 0, and each
    row is normalized to sum to 1 (an all-zero row stays zero).
    """
    rows = f_in.f_in.astype(np.float64)
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms == 0.0):
        bad = np.flatnonzero(norms == 0.0).tolist()
        raise DegenerateDescriptorError(f"zero-norm pooled rows for objects {bad}")
    unit = rows / norms[:, None]
    sim = np.clip(unit @ unit.T, 0.0, None)
    np.fill_diagonal(sim, 0.0)
    sums = sim.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        a2 = np.where(sums > 0.0, sim / sums, 0.0)
    np.fill_diagonal(a2, 0.0)
    return a2


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def dcga_descriptors(records: list[ObjectRecord], params: DcgaParams) -> DescriptorSet:
    """Compress object feature maps into unit-norm descriptor rows.

    literal: Y = (A2 + I) @ sigmoid(Fa)
    gated:   Y = (A2 + I) @ (f_in * sigmoid(Fa))
    none:    Y = f_in

    where row i of Fa is f_in[i] * a_i * C — the pooled row gated by that
    object's channel attention, rescaled by C to undo the 1/C^2 diagonal
    normalization that would otherwise pin the sigmoid at 0.5.

    With ``center`` on (and at least two objects), the mean descriptor row
    is subtracted from every row before normalization. Pooled features of
    masked objects are all-positive and share most of their profile, which
    drives all pairwise cosines toward 1 and starves the entropic matcher
    of signal; removing the shared component turns the score into a
    correlation across the scene's objects. Single-object scenes and the
    "none" ablation variant are left untouched.
    """
    pooled = pool_objects(records, params.pool_mode)
    f_in = pooled.f_in
    m, c = f_in.shape
    if params.variant == "none":
        y = f_in.copy()
    else:
        fa = np.stack(
            [f_in[i] * channel_weights(f_in[i], params) * c for i in range(m)]
        )
        gate = _sigmoid(fa)
        mixed = gate if params.variant == "literal" else f_in * gate
        y = (object_adjacency(pooled) + np.eye(m)) @ mixed
        if params.center and m > 1:
            centered = y - y.mean(axis=0, keepdims=True)
            # all-identical rows would center to zero; keep them as-is
            if np.linalg.norm(centered, axis=1).min() > 1e-12:
                y = centered
    norms = np.linalg.norm(y, axis=1)
    if np.any(norms == 0.0):
        bad = np.flatnonzero(norms == 0.0).tolist()
        raise DegenerateDescriptorError(f"zero-norm descriptors for objects {bad}")
    return DescriptorSet(d=y / norms[:, None])
