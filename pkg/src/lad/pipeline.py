"""End-to-end orchestration: bank build, per-scene detection, evaluation.

A scene bundle on disk is a directory holding ``image.png``,
``features.sltf`` (C x H' x W'), ``masks.sltf`` (K x H x W, u8), and for
labeled data ``gt.json`` (+ ``gt_regions.sltf``). Detection retrieves the k
nearest bank templates, upsamples features guided by each scene's own
image, builds per-object descriptors, matches per reference, and fuses
Mahalanobis maps into the final anomaly map.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bank as bank_mod
from . import metrics as metrics_mod
from . import synthlab, tensor_store
from .config import PipelineConfig
from .descriptors import dcga_descriptors
from .errors import DataError
from .interp import bilinear_resize
from .matcher import Assignment, match_descriptors
from .scene_objects import (
    ObjectRecord,
    area_bounds,
    filter_masks,
    object_feature_maps,
    whole_frame_record,
)
from .scorer import AnomalyMap, lightweight_fuse, score_objects
from .upsampler import jbu_upsample

LOGGER = logging.getLogger(__name__)

REPORT_NAME = "report.json"
MAP_NAME = "anomaly.sltf"
OVERLAY_NAME = "overlay.png"


class _StageClock:
    """Wall-clock per pipeline stage; total is reported separately."""

    def __init__(self) -> None:
        self.stages: dict[str, float] = {}
        self._start = time.perf_counter()
        self._last = self._start

    def lap(self, name: str) -> None:
        now = time.perf_counter()
        self.stages[name] = self.stages.get(name, 0.0) + (now - self._last)
        self._last = now

    def report(self) -> dict:
        return {"stages": self.stages, "wall": time.perf_counter() - self._start}


@dataclass
class SceneFiles:
    """Loaded on-disk scene bundle."""

    name: str
    image: np.ndarray  # (3, H, W) float32 in [0, 1]
    features: np.ndarray  # (C, H', W') float32
    masks: list[tensor_store.MaskPage]


def load_scene_dir(scene_dir: str | Path) -> SceneFiles:
    from PIL import Image

    scene_dir = Path(scene_dir)
    img_path = scene_dir / synthlab.IMAGE_NAME
    feat_path = scene_dir / synthlab.FEATURES_NAME
    mask_path = scene_dir / synthlab.MASKS_NAME
    for p in (img_path, feat_path, mask_path):
        if not p.exists():
            raise DataError(f"scene {scene_dir} is missing {p.name}")
    rgb = np.asarray(Image.open(img_path).convert("RGB"), dtype=np.float32) / 255.0
    return SceneFiles(
        name=scene_dir.name,
        image=np.moveaxis(rgb, -1, 0),
        features=tensor_store.read_tensor(feat_path),
        masks=tensor_store.load_mask_set(mask_path),
    )


def build_bank_dir(
    template_dirs: list[Path], out_dir: str | Path, config: PipelineConfig
) -> Path:
    """Build (and optionally coreset-reduce) a bank from scene directories."""
    maps = []
    sources = {}
    for d in sorted(template_dirs):
        feat = tensor_store.read_tensor(Path(d) / synthlab.FEATURES_NAME)
        maps.append((Path(d).name, feat))
        sources[Path(d).name] = Path(d).as_posix()
    bank = bank_mod.build_bank(maps)
    if config.coreset_size is not None:
        bank = bank_mod.coreset_subsample(bank, config.coreset_size, config.seed)
    return bank_mod.save_bank(bank, out_dir, sources=sources)


def _upsampled(scene: SceneFiles, config: PipelineConfig) -> np.ndarray:
    factor = config.upsample.factor
    c, h, w = scene.features.shape
    guide = scene.image
    target = (factor * h, factor * w)
    if guide.shape[1:] != target:
        guide = np.clip(bilinear_resize(guide, target), 0.0, 1.0).astype(np.float32)
    return jbu_upsample(
        scene.features,
        guide,
        factor,
        sigma_spatial=config.upsample.sigma_spatial,
        sigma_range=config.upsample.sigma_range,
    )


def _scene_objects(
    scene: SceneFiles, up: np.ndarray, config: PipelineConfig
) -> tuple[list[ObjectRecord], bool]:
    """Object records for one scene; falls back to a whole-frame object."""
    src_hw = scene.masks[0].mask.shape if scene.masks else scene.image.shape[1:]
    lo, hi = area_bounds(src_hw, config.mask_filter.min_area_frac,
                         config.mask_filter.max_area_frac)
    kept = filter_masks(scene.masks, lo, hi)
    if not kept:
        return [whole_frame_record(up)], True
    return object_feature_maps(kept, up), False


@dataclass
class DetectionResult:
    anomaly_map: AnomalyMap
    report: dict


def detect_scene(
    query_dir: str | Path,
    bank: bank_mod.TemplateBank,
    sources: dict[str, str],
    config: PipelineConfig,
    lightweight: bool = False,
) -> DetectionResult:
    """Run retrieval, matching, and scoring for one query scene."""
    clock = _StageClock()
    query = load_scene_dir(query_dir)
    clock.lap("load")

    result = bank_mod.image_nns(bank, query.features, config.k)
    ref_scenes = []
    for tid, _, _ in result.neighbors:
        if tid not in sources:
            raise DataError(f"bank manifest has no source path for template {tid!r}")
        ref_scenes.append(load_scene_dir(sources[tid]))
    clock.lap("retrieve")

    q_up = _upsampled(query, config)
    ref_ups = [_upsampled(r, config) for r in ref_scenes]
    clock.lap("upsample")

    q_records, no_objects = _scene_objects(query, q_up, config)
    ref_records = []
    for r, up in zip(ref_scenes, ref_ups):
        records, ref_empty = _scene_objects(r, up, config)
        if ref_empty:
            LOGGER.warning("reference %s has no key objects; using whole frame", r.name)
        ref_records.append(records)
    clock.lap("objects")

    params = config.dcga_params()
    dq = dcga_descriptors(q_records, params)
    drs = [dcga_descriptors(recs, params) for recs in ref_records]
    clock.lap("descriptors")

    assignments: list[Assignment] = []
    for dr in drs:
        asg, _ = match_descriptors(
            dq,
            dr,
            bin_score=config.match.bin_score,
            iters=config.match.iters,
            tol=config.match.tol,
            match_threshold=config.match.threshold,
        )
        assignments.append(asg)
    clock.lap("match")

    out_hw = query.image.shape[1:]
    score_params = config.score_params(out_hw=out_hw)
    fuse = lightweight_fuse if lightweight else score_objects
    amap = fuse(assignments, q_records, ref_records, score_params)
    clock.lap("score")

    object_rows = []
    for i in range(len(q_records)):
        per_ref = []
        for (tid, _, _), asg in zip(result.neighbors, assignments):
            ri = asg.matched_ref_of(i)
            if ri is not None:
                conf = next(c for q, r, c in asg.matched if q == i)
                per_ref.append(
                    {"template": tid, "status": "matched", "ref": ri,
                     "confidence": round(conf, 9)}
                )
            else:
                ri = asg.nearest_ref_of(i)
                conf = next(c for q, r, c in asg.unmatched_query if q == i)
                per_ref.append(
                    {"template": tid, "status": "unmatched", "nearest_ref": ri,
                     "confidence": round(conf, 9)}
                )
        object_rows.append(
            {
                "object_id": i,
                "matched": any(a.matched_ref_of(i) is not None for a in assignments),
                "per_reference": per_ref,
            }
        )

    report = {
        "query": Path(query_dir).name,
        "image_score": amap.image_score,
        "no_objects": no_objects,
        "lightweight": lightweight,
        "neighbors": [
            {"id": tid, "distance": dist, "rank": rank}
            for tid, dist, rank in result.neighbors
        ],
        "primary_template": bank_mod.pick_reference(result, config.seed),
        "num_query_objects": len(q_records),
        "objects": object_rows,
        "unmatched_ref": [
            {"template": tid, "refs": asg.unmatched_ref}
            for (tid, _, _), asg in zip(result.neighbors, assignments)
        ],
        "timings": clock.report(),
    }
    return DetectionResult(anomaly_map=amap, report=report)


def write_detection(result: DetectionResult, query: SceneFiles, out_dir: str | Path) -> None:
    """Persist the anomaly map, a heat overlay, and the JSON report."""
    from PIL import Image

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scores = result.anomaly_map.scores
    tensor_store.write_tensor(scores.astype(np.float32), out / MAP_NAME)

    peak = scores.max()
    heat = scores / peak if peak > 0 else scores
    gray = query.image.mean(axis=0)
    overlay = np.stack(
        [np.clip(0.45 * gray + 0.55 * heat, 0, 1),
         0.45 * gray,
         0.45 * gray],
        axis=-1,
    )
    Image.fromarray(np.round(overlay * 255.0).astype(np.uint8)).save(out / OVERLAY_NAME)
    (out / REPORT_NAME).write_text(
        json.dumps(result.report, indent=2, sort_keys=True) + "\n"
    )


def scene_dirs_in(dataset_dir: str | Path) -> list[Path]:
    root = Path(dataset_dir)
    dirs = sorted(
        d for d in root.iterdir() if d.is_dir() and (d / synthlab.FEATURES_NAME).exists()
    )
    if not dirs:
        raise DataError(f"no scene directories under {root}")
    return dirs


def eval_dataset(
    dataset_dir: str | Path,
    bank: bank_mod.TemplateBank,
    sources: dict[str, str],
    config: PipelineConfig,
    out_dir: str | Path | None = None,
    lightweight: bool = False,
    ablation: str | None = None,
    workers: int = 1,
) -> dict:
    """Detect every labeled scene and aggregate AUROC and sPRO."""
    t0 = time.perf_counter()
    scenes = scene_dirs_in(dataset_dir)

    def run_one(scene_dir: Path):
        res = detect_scene(scene_dir, bank, sources, config, lightweight=lightweight)
        label, regions, anomaly = synthlab.load_scene_gt(scene_dir)
        return scene_dir, res, label, regions, anomaly

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_one, scenes))
    else:
        rows = [run_one(s) for s in scenes]

    labels = [r[2] for r in rows]
    scores = [r[1].anomaly_map.image_score for r in rows]
    if len(set(labels)) < 2:
        raise DataError("evaluation dataset must contain both labels")
    image_auroc = metrics_mod.auroc(scores, labels)
    pixel_spro = metrics_mod.spro(
        [r[1].anomaly_map.scores for r in rows], [r[3] for r in rows], fpr_cap=0.05
    )

    per_scene = []
    for scene_dir, res, label, _, anomaly in rows:
        per_scene.append(
            {
                "scene": scene_dir.name,
                "label": label,
                "anomaly": anomaly,
                "image_score": res.anomaly_map.image_score,
                "no_objects": res.report["no_objects"],
            }
        )
        if out_dir is not None:
            query = load_scene_dir(scene_dir)
            write_detection(res, query, Path(out_dir) / scene_dir.name)

    report = {
        "image_auroc": image_auroc,
        "pixel_spro": pixel_spro,
        "fpr_cap": 0.05,
        "per_category": {
            config.category: {"image_auroc": image_auroc, "pixel_spro": pixel_spro}
        },
        "num_scenes": len(rows),
        "lightweight": lightweight,
        "ablation": ablation,
        "per_scene": per_scene,
        "timings": {"wall": time.perf_counter() - t0},
    }
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "metrics.json").write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n"
        )
    return report


def match_quality(
    query_bundle: synthlab.SceneBundle,
    ref_bundle: synthlab.SceneBundle,
    config: PipelineConfig,
) -> tuple[int, int, int]:
    """Matching correctness between two normal fixed-order scenes.

    Objects of normal scenes from the same spec correspond index-to-index
    (board to board, cell to cell), so a matched pair (i, j) is correct iff
    i == j. Returns (correct, matched, expected) for precision/recall.
    """
    recs = []
    for bundle in (query_bundle, ref_bundle):
        up = jbu_upsample(
            bundle.features,
            bundle.image,
            config.upsample.factor,
            config.upsample.sigma_spatial,
            config.upsample.sigma_range,
        )
        recs.append(object_feature_maps(bundle.masks, up))
    dq = dcga_descriptors(recs[0], config.dcga_params())
    dr = dcga_descriptors(recs[1], config.dcga_params())
    asg, _ = match_descriptors(
        dq,
        dr,
        bin_score=config.match.bin_score,
        iters=config.match.iters,
        tol=config.match.tol,
        match_threshold=config.match.threshold,
    )
    correct = sum(1 for q, r, _ in asg.matched if q == r)
    return correct, len(asg.matched), len(recs[0])
