"""Object matching via entropic optimal transport with a dustbin.

The descriptor score matrix is augmented by one extra row and column (the
bin) that absorbs unmatched objects, normalized by log-domain Sinkhorn
iterations, and hardened into a partial assignment by a mutual-max rule.
The interior plan P always satisfies P @ 1 <= 1 and P.T @ 1 <= 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .descriptors import DescriptorSet
from .errors import ConfigError, DataError


@dataclass(frozen=True)
class ScoreMatrix:
    """M x N inner products of unit descriptor rows; entries in [-1, 1]."""

    s: np.ndarray

    def __post_init__(self) -> None:
        if self.s.ndim != 2:
            raise DataError(f"score matrix must be 2-D, got shape {self.s.shape}")
        if np.abs(self.s).max(initial=0.0) > 1.0 + 1e-6:
            raise DataError("score entries must lie in [-1, 1]")


@dataclass(frozen=True)
class TransportPlan:
    """Soft assignment with bin row/column; interior is plan[:-1, :-1]."""

    p_bar: np.ndarray  # (M+1, N+1), non-negative

    @property
    def interior(self) -> np.ndarray:
        return self.p_bar[:-1, :-1]

    @property
    def row_bin(self) -> np.ndarray:
        """Bin mass per query row, shape (M,)."""
        return self.p_bar[:-1, -1]

    @property
    def col_bin(self) -> np.ndarray:
        """Bin mass per reference column, shape (N,)."""
        return self.p_bar[-1, :-1]


@dataclass
class Assignment:
    """Hard partial assignment extracted from a transport plan."""

    matched: list[tuple[int, int, float]]  # (query_idx, ref_idx, confidence)
    unmatched_query: list[tuple[int, int, float]]  # (query_idx, nearest_ref, conf)
    unmatched_ref: list[int] = field(default_factory=list)

    def matched_ref_of(self, query_idx: int) -> int | None:
        for qi, ri, _ in self.matched:
            if qi == query_idx:
                return ri
        return None

    def nearest_ref_of(self, query_idx: int) -> int:
        """Matched partner if present, else the nearest-reference hint."""
        ri = self.matched_ref_of(query_idx)
        if ri is not None:
            return ri
        for qi, ri, _ in self.unmatched_query:
            if qi == query_idx:
                return ri
        raise KeyError(f"query object {query_idx} not present in assignment")

    def to_json(self) -> dict:
        return {
            "matched": [
                {"query": q, "ref": r, "confidence": c} for q, r, c in self.matched
            ],
            "unmatched_query": [
                {"query": q, "nearest_ref": r, "confidence": c}
                for q, r, c in self.unmatched_query
            ],
            "unmatched_ref": list(self.unmatched_ref),
        }


def score_matrix(dq: DescriptorSet, dr: DescriptorSet) -> ScoreMatrix:
    """Pairwise inner products between query and reference descriptors."""
    if dq.d.shape[1] != dr.d.shape[1]:
        raise DataError(
            f"descriptor widths differ: {dq.d.shape[1]} vs {dr.d.shape[1]}"
        )
    s = dq.d @ dr.d.T
    return ScoreMatrix(s=np.clip(s, -1.0, 1.0))


def _logsumexp(x: np.ndarray, axis: int) -> np.ndarray:
    m = x.max(axis=axis, keepdims=True)
    return (m + np.log(np.exp(x - m).sum(axis=axis, keepdims=True))).squeeze(axis)


def sinkhorn_assign(
    s: ScoreMatrix | np.ndarray,
    bin_score: float,
    iters: int = 100,
    tol: float = 1e-6,
) -> TransportPlan:
    """Log-domain Sinkhorn on the bin-augmented score matrix.

    The augmented kernel is exp(S extended by one bin row/column filled with
    ``bin_score``, corner included). Target masses are 1 per real row and
    column, N for the bin row and M for the bin column, so the bin can
    absorb any number of unmatched objects. Iterations alternate row and
    column scalings until the largest marginal violation drops below
    ``tol`` or ``iters`` is reached.
    """
    if iters < 1:
        raise ConfigError("iters must be >= 1")
    if tol <= 0:
        raise ConfigError("tol must be positive")
    sm = s.s if isinstance(s, ScoreMatrix) else np.asarray(s, dtype=np.float64)
    if not np.all(np.isfinite(sm)) or not np.isfinite(bin_score):
        raise DataError("scores must be finite")
    m, n = sm.shape

    aug = np.full((m + 1, n + 1), float(bin_score), dtype=np.float64)
    aug[:m, :n] = sm
    log_row_mass = np.log(np.concatenate([np.ones(m), [float(n)]]))
    log_col_mass = np.log(np.concatenate([np.ones(n), [float(m)]]))
    row_mass = np.exp(log_row_mass)
    col_mass = np.exp(log_col_mass)

    u = np.zeros(m + 1)
    v = np.zeros(n + 1)
    for _ in range(iters):
        u = log_row_mass - _logsumexp(aug + v[None, :], axis=1)
        v = log_col_mass - _logsumexp(aug + u[:, None], axis=0)
        plan = np.exp(aug + u[:, None] + v[None, :])
        err = max(
            np.abs(plan.sum(axis=1) - row_mass).max(),
            np.abs(plan.sum(axis=0) - col_mass).max(),
        )
        if err < tol:
            break
    return TransportPlan(p_bar=plan)


def extract_matches(plan: TransportPlan, match_threshold: float = 0.2) -> Assignment:
    """Harden a soft plan into mutually-exclusive matches.

    (i, j) is matched iff P[i, j] is the max of interior row i and of
    interior column j, reaches ``match_threshold``, and beats both the
    query's and the reference's bin mass. Every other query lands in
    ``unmatched_query`` with its interior argmax as the nearest-reference
    hint; references never chosen go to ``unmatched_ref``.
    """
    p = plan.interior
    m, n = p.shape
    row_arg = p.argmax(axis=1)  # ties resolve to the lowest index
    col_arg = p.argmax(axis=0)
    matched = []
    matched_queries = set()
    matched_refs = set()
    for i in range(m):
        j = int(row_arg[i])
        val = float(p[i, j])
        if (
            int(col_arg[j]) == i
            and val >= match_threshold
            and val > float(plan.row_bin[i])
            and val > float(plan.col_bin[j])
        ):
            matched.append((i, j, val))
            matched_queries.add(i)
            matched_refs.add(j)
    unmatched_query = [
        (i, int(row_arg[i]), float(p[i, row_arg[i]]))
        for i in range(m)
        if i not in matched_queries
    ]
    unmatched_ref = [j for j in range(n) if j not in matched_refs]
    return Assignment(
        matched=matched, unmatched_query=unmatched_query, unmatched_ref=unmatched_ref
    )


def match_descriptors(
    dq: DescriptorSet,
    dr: DescriptorSet,
    bin_score: float,
    iters: int = 100,
    tol: float = 1e-6,
    match_threshold: float = 0.2,
) -> tuple[Assignment, TransportPlan]:
    """Score, transport, and harden in one call (one reference image)."""
    plan = sinkhorn_assign(score_matrix(dq, dr), bin_score, iters=iters, tol=tol)
    return extract_matches(plan, match_threshold), plan
