"""Anomaly-free template features bank: build, coreset subsample, retrieve.

Retrieval is image-level: feature maps are flattened and compared with the
exact Euclidean metric (no approximate index at this scale).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tensor_store
from .errors import ConfigError, DataError


@dataclass
class TemplateBank:
    """Ordered set of flattened anomaly-free feature maps, one per template."""

    ids: list[str]
    flat: np.ndarray  # (Z, C*H*W) float32, rows in id order
    shape: tuple[int, int, int]  # (C, H, W) of every template

    def __post_init__(self) -> None:
        if len(self.ids) == 0:
            raise DataError("template bank must contain at least one entry")
        if len(set(self.ids)) != len(self.ids):
            raise DataError("template ids must be unique")
        if self.flat.shape != (len(self.ids), int(np.prod(self.shape))):
            raise DataError(
                f"flat matrix shape {self.flat.shape} inconsistent with "
                f"{len(self.ids)} entries of shape {self.shape}"
            )

    def __len__(self) -> int:
        return len(self.ids)

    def feature_map(self, template_id: str) -> np.ndarray:
        idx = self.ids.index(template_id)
        return self.flat[idx].reshape(self.shape)


@dataclass(frozen=True)
class RetrievalResult:
    """k nearest templates, ascending by distance (ties by id)."""

    neighbors: list[tuple[str, float, int]]  # (template_id, distance, rank)


def build_bank(maps: list[tuple[str, np.ndarray]]) -> TemplateBank:
    """Flatten (id, feature map) pairs row-major, preserving input order."""
    if not maps:
        raise DataError("cannot build a bank from zero feature maps")
    ids = [m[0] for m in maps]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise DataError(f"duplicate template ids: {dupes}")
    shape = tuple(maps[0][1].shape)
    if len(shape) != 3:
        raise DataError(f"feature maps must be (C, H, W), got {shape}")
    flat = np.empty((len(maps), int(np.prod(shape))), dtype=np.float32)
    for row, (tid, fmap) in enumerate(maps):
        if tuple(fmap.shape) != shape:
            raise DataError(
                f"template {tid!r} has shape {tuple(fmap.shape)}, expected {shape}"
            )
        flat[row] = np.asarray(fmap, dtype=np.float32).reshape(-1)
    return TemplateBank(ids=ids, flat=flat, shape=shape)  # type: ignore[arg-type]


def coreset_subsample(bank: TemplateBank, m: int, seed: int) -> TemplateBank:
    """Greedy k-center (farthest-point) reduction to ``m`` templates.

    The first pick is seeded-uniform; each following pick maximizes its
    minimum Euclidean distance to the picks so far. The returned bank keeps
    the original relative order of the chosen entries.
    """
    z = len(bank)
    if not 1 <= m <= z:
        raise ConfigError(f"coreset size {m} outside 1..{z}")
    rng = np.random.default_rng(seed)
    first = int(rng.integers(z))
    chosen = [first]
    feats = bank.flat.astype(np.float64)
    min_dist = np.linalg.norm(feats - feats[first], axis=1)
    for _ in range(m - 1):
        min_dist[chosen] = -1.0  # never re-pick
        nxt = int(np.argmax(min_dist))
        chosen.append(nxt)
        min_dist = np.minimum(min_dist, np.linalg.norm(feats - feats[nxt], axis=1))
    order = sorted(chosen)
    return TemplateBank(
        ids=[bank.ids[i] for i in order],
        flat=bank.flat[order].copy(),
        shape=bank.shape,
    )


def covering_radius(bank: TemplateBank, subset_ids: list[str]) -> float:
    """Max distance from any bank entry to its nearest subset entry."""
    rows = [bank.ids.index(i) for i in subset_ids]
    feats = bank.flat.astype(np.float64)
    sub = feats[rows]
    dists = np.linalg.norm(feats[:, None, :] - sub[None, :, :], axis=2)
    return float(dists.min(axis=1).max())


def image_nns(bank: TemplateBank, query: np.ndarray, k: int) -> RetrievalResult:
    """k bank entries nearest to ``query`` by Euclidean distance on flats.

    Ties are broken by ascending template id, which also makes the result
    invariant to bank entry order.
    """
    if tuple(query.shape) != bank.shape:
        raise DataError(
            f"query shape {tuple(query.shape)} does not match bank shape {bank.shape}"
        )
    if not 1 <= k <= len(bank):
        raise ConfigError(f"k={k} outside 1..{len(bank)}")
    q = np.asarray(query, dtype=np.float32).reshape(-1).astype(np.float64)
    dists = np.linalg.norm(bank.flat.astype(np.float64) - q, axis=1)
    order = sorted(range(len(bank)), key=lambda i: (dists[i], bank.ids[i]))[:k]
    neighbors = [(bank.ids[i], float(dists[i]), rank) for rank, i in enumerate(order)]
    return RetrievalResult(neighbors=neighbors)


def pick_reference(result: RetrievalResult, seed: int) -> str:
    """Seeded-uniform pick among the retrieved candidates.

    The pipeline consumes all k neighbors; this helper exists for callers
    that want a single robust reference template.
    """
    rng = np.random.default_rng(seed)
    return result.neighbors[int(rng.integers(len(result.neighbors)))][0]


# -- persistence --------------------------------------------------------------

MANIFEST_NAME = "manifest.json"


def save_bank(bank: TemplateBank, out_dir: str | Path,
              sources: dict[str, str] | None = None) -> Path:
    """Persist a bank as ``manifest.json`` plus one ``.sltf`` per template.

    ``sources`` optionally records, per template id, the path of the scene
    bundle the features came from (used later to locate masks and images).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for idx, tid in enumerate(bank.ids):
        fname = f"{idx:04d}_{tid}.sltf"
        tensor_store.write_tensor(
            bank.flat[idx].reshape(bank.shape).astype(np.float32), out / fname
        )
        entry = {"id": tid, "file": fname}
        if sources and tid in sources:
            entry["source"] = sources[tid]
        entries.append(entry)
    manifest = {
        "format": "lad-template-bank",
        "version": 1,
        "shape": list(bank.shape),
        "entries": entries,
    }
    manifest_path = out / MANIFEST_NAME
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path


def load_bank(bank_dir: str | Path) -> tuple[TemplateBank, dict[str, str]]:
    """Load a persisted bank; returns the bank and the id -> source map."""
    bank_dir = Path(bank_dir)
    manifest_path = bank_dir / MANIFEST_NAME
    if not manifest_path.exists():
        raise DataError(f"no {MANIFEST_NAME} in {bank_dir}")
    manifest = json.loads(manifest_path.read_text())
    shape = tuple(manifest["shape"])
    maps = []
    sources: dict[str, str] = {}
    for entry in manifest["entries"]:
        fmap = tensor_store.read_tensor(bank_dir / entry["file"])
        if tuple(fmap.shape) != shape:
            raise DataError(
                f"bank entry {entry['id']!r} shape {tuple(fmap.shape)} != manifest {shape}"
            )
        maps.append((entry["id"], fmap))
        if "source" in entry:
            sources[entry["id"]] = entry["source"]
    return build_bank(maps), sources
