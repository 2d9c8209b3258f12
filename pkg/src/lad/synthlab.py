"""Deterministic synthetic scenes with planted anomalies and exact labels.

Scenes are grids of anti-aliased colored shapes sitting on a board object
(akin to a compartment tray), rendered at 4x supersampling so masks and
images are identical across platforms. A hand-coded patch-statistics
feature extractor stands in for a pretrained backbone; its positional
channels let the scorer notice displaced objects.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import tensor_store
from .errors import ConfigError, DataError
from .metrics import GtRegion
from .tensor_store import MaskPage, mask_page_from_array

SHAPES = ("circle", "square", "triangle", "diamond", "cross")
ANOMALIES = ("none", "missing", "extra", "swapped", "moved", "wrong_combo")
LAYOUT_RULES = ("fixed_order", "free_placement")

SUPERSAMPLE = 4

BACKGROUND = np.array([0.86, 0.86, 0.88])
BOARD_COLOR = np.array([0.52, 0.54, 0.57])

DEFAULT_PALETTE = [
    ("circle", (0.85, 0.15, 0.12)),
    ("square", (0.10, 0.60, 0.20)),
    ("triangle", (0.12, 0.25, 0.80)),
    ("diamond", (0.90, 0.70, 0.10)),
    ("cross", (0.55, 0.15, 0.65)),
    ("circle", (0.10, 0.65, 0.70)),
    ("square", (0.90, 0.45, 0.10)),
    ("triangle", (0.55, 0.35, 0.15)),
    ("diamond", (0.85, 0.35, 0.55)),
]


@dataclass(frozen=True)
class SceneSpec:
    """Recipe for one deterministic scene."""

    rows: int = 3
    cols: int = 3
    palette: tuple = tuple(DEFAULT_PALETTE)
    layout_rule: str = "fixed_order"
    anomaly: str = "none"
    seed: int = 0
    image_size: int = 224
    include_board: bool = True
    jitter: float = 0.04  # center jitter as a fraction of the cell size

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ConfigError("grid must be at least 1x1")
        if self.anomaly not in ANOMALIES:
            raise ConfigError(f"anomaly must be one of {ANOMALIES}")
        if self.layout_rule not in LAYOUT_RULES:
            raise ConfigError(f"layout_rule must be one of {LAYOUT_RULES}")
        if not self.palette:
            raise ConfigError("palette must not be empty")
        for shape, _ in self.palette:
            if shape not in SHAPES:
                raise ConfigError(f"unknown shape {shape!r}")


@dataclass
class SceneBundle:
    """Rendered scene plus everything the pipeline and metrics need."""

    image: np.ndarray  # (3, H, W) float32 in [0, 1]
    masks: list[MaskPage]
    features: np.ndarray  # (C, H', W') float32
    gt_regions: list[GtRegion]
    label: int  # 1 iff gt_regions is non-empty
    anomaly: str
    spec: SceneSpec


@dataclass
class _Shape:
    kind: str
    color: np.ndarray
    cy: float
    cx: float
    radius: float


def _coverage(shape: _Shape, size: int) -> np.ndarray:
    """Boolean coverage of one shape at supersampled resolution."""
    n = size * SUPERSAMPLE
    coords = (np.arange(n) + 0.5) / SUPERSAMPLE
    dy = coords[:, None] - shape.cy
    dx = coords[None, :] - shape.cx
    r = shape.radius
    if shape.kind == "circle":
        return dy * dy + dx * dx <= r * r
    if shape.kind == "square":
        return np.maximum(np.abs(dy), np.abs(dx)) <= 0.85 * r
    if shape.kind == "diamond":
        return np.abs(dy) + np.abs(dx) <= 1.1 * r
    if shape.kind == "cross":
        arm = 0.38 * r
        return ((np.abs(dx) <= arm) & (np.abs(dy) <= r)) | (
            (np.abs(dy) <= arm) & (np.abs(dx) <= r)
        )
    # upward triangle: below the apex, above the base, inside both slanted edges
    top, bottom, half = -r, 0.75 * r, 0.95 * r
    frac = (dy - top) / (bottom - top)
    return (dy >= top) & (dy <= bottom) & (np.abs(dx) <= half * np.clip(frac, 0, 1))


def _downsample(alpha_big: np.ndarray) -> np.ndarray:
    n = alpha_big.shape[0] // SUPERSAMPLE
    return (
        alpha_big.astype(np.float64)
        .reshape(n, SUPERSAMPLE, n, SUPERSAMPLE)
        .mean(axis=(1, 3))
    )


def _board_bounds(size: int) -> tuple[float, float]:
    margin = 0.06 * size
    return margin, size - margin


def _grid_layout(spec: SceneSpec, rng: np.random.Generator) -> list[_Shape]:
    lo, hi = _board_bounds(spec.image_size)
    cell_h = (hi - lo) / spec.rows
    cell_w = (hi - lo) / spec.cols
    cells = spec.rows * spec.cols
    order = np.arange(cells)
    if spec.layout_rule == "free_placement":
        order = rng.permutation(cells)
    shapes = []
    for cell in range(cells):
        kind, color = spec.palette[int(order[cell]) % len(spec.palette)]
        row, col = divmod(cell, spec.cols)
        jy = (rng.random() * 2 - 1) * spec.jitter * cell_h
        jx = (rng.random() * 2 - 1) * spec.jitter * cell_w
        radius = 0.30 * min(cell_h, cell_w) * (0.95 + 0.1 * rng.random())
        shapes.append(
            _Shape(
                kind=kind,
                color=np.asarray(color, dtype=np.float64),
                cy=lo + (row + 0.5) * cell_h + jy,
                cx=lo + (col + 0.5) * cell_w + jx,
                radius=radius,
            )
        )
    return shapes


def _clear_of(cand: _Shape, others: list[_Shape], margin: float = 3.0) -> bool:
    """True when the candidate disc stays clear of every other object."""
    return all(
        np.hypot(cand.cy - s.cy, cand.cx - s.cx) > cand.radius + s.radius + margin
        for s in others
    )


def _on_board(cand: _Shape, spec: SceneSpec) -> bool:
    lo, hi = _board_bounds(spec.image_size)
    pad = cand.radius + 2.0
    return lo + pad < cand.cy < hi - pad and lo + pad < cand.cx < hi - pad


def _free_spots(spec: SceneSpec, rng: np.random.Generator) -> list[tuple[float, float]]:
    """Candidate positions clear of the grid: cell-junction midpoints first
    (the natural gaps of a fully occupied grid), then random board points."""
    lo, hi = _board_bounds(spec.image_size)
    cell_h = (hi - lo) / spec.rows
    cell_w = (hi - lo) / spec.cols
    junctions = [
        (lo + r * cell_h, lo + c * cell_w)
        for r in range(1, spec.rows)
        for c in range(1, spec.cols)
    ]
    rng.shuffle(junctions)
    randoms = [
        (lo + (hi - lo) * rng.random(), lo + (hi - lo) * rng.random())
        for _ in range(256)
    ]
    return junctions + randoms


def _apply_anomaly(
    spec: SceneSpec, shapes: list[_Shape], rng: np.random.Generator
) -> tuple[list[_Shape], list[_Shape]]:
    """Returns (scene shapes, ground-truth evidence shapes).

    Evidence shapes mark where anomaly credit belongs: removed footprints,
    inserted objects, displaced objects (old and new position), recolored
    or exchanged objects.
    """
    kind = spec.anomaly
    cells = len(shapes)
    if kind == "none":
        return shapes, []
    if kind in ("swapped", "moved") and spec.layout_rule == "free_placement":
        raise ConfigError(f"anomaly {kind!r} is no violation under free placement")
    if kind == "missing":
        victim = int(rng.integers(cells))
        kept = [s for i, s in enumerate(shapes) if i != victim]
        return kept, [shapes[victim]]
    if kind == "extra":
        if cells < 2:
            raise ConfigError("grid too small for an extra-object anomaly")
        src = int(rng.integers(cells))
        donor = shapes[src]
        # far from the donor (a nearby duplicate is indistinguishable from
        # jitter) and clear of every other object (no occlusion)
        for cy, cx in _free_spots(spec, rng):
            dup = replace(donor, cy=cy, cx=cx, radius=donor.radius * 0.85)
            far_enough = np.hypot(cy - donor.cy, cx - donor.cx) >= 2.2 * donor.radius
            if far_enough and _clear_of(dup, shapes) and _on_board(dup, spec):
                return shapes + [dup], [dup]
        raise ConfigError("grid too dense to insert an extra object")
    if kind == "swapped":
        pairs = [
            (i, j)
            for i in range(cells)
            for j in range(i + 1, cells)
            if shapes[i].kind != shapes[j].kind
            or tuple(shapes[i].color) != tuple(shapes[j].color)
        ]
        if not pairs:
            raise ConfigError("grid too small (or palette too uniform) to swap")
        i, j = pairs[int(rng.integers(len(pairs)))]
        out = list(shapes)
        out[i] = replace(shapes[i], kind=shapes[j].kind, color=shapes[j].color)
        out[j] = replace(shapes[j], kind=shapes[i].kind, color=shapes[i].color)
        return out, [out[i], out[j]]
    if kind == "moved":
        lo, hi = _board_bounds(spec.image_size)
        cell = (hi - lo) / max(spec.rows, spec.cols)
        for victim in rng.permutation(cells):
            victim = int(victim)
            moved = shapes[victim]
            others = [s for i, s in enumerate(shapes) if i != victim]
            for cy, cx in _free_spots(spec, rng):
                if np.hypot(cy - moved.cy, cx - moved.cx) < cell:
                    continue  # must be displaced by at least one cell
                cand = replace(moved, cy=cy, cx=cx)
                if _on_board(cand, spec) and _clear_of(cand, others):
                    out = list(shapes)
                    out[victim] = cand
                    return out, [shapes[victim], cand]
        raise ConfigError("grid too small to displace an object by one cell")
    # wrong_combo: keep the shape, take the most dissimilar palette color
    victim = int(rng.integers(cells))
    own = shapes[victim].color
    colors = [c for _, c in spec.palette if tuple(c) != tuple(own)]
    if not colors:
        raise ConfigError("palette too uniform for a wrong-combination anomaly")
    wrong = max(colors, key=lambda c: float(np.sum((np.asarray(c) - own) ** 2)))
    out = list(shapes)
    out[victim] = replace(shapes[victim], color=np.asarray(wrong, dtype=np.float64))
    return out, [out[victim]]


def generate_scene(spec: SceneSpec) -> SceneBundle:
    """Render a scene deterministically from its spec."""
    rng = np.random.default_rng(spec.seed)
    base = _grid_layout(spec, rng)
    shapes, evidence = _apply_anomaly(spec, base, rng)
    size = spec.image_size

    coverages = [_coverage(s, size) for s in shapes]
    alphas = [_downsample(c) for c in coverages]

    img = np.empty((size, size, 3), dtype=np.float64)
    img[:] = BACKGROUND
    board_big = None
    if spec.include_board:
        lo, hi = _board_bounds(size)
        n = size * SUPERSAMPLE
        coords = (np.arange(n) + 0.5) / SUPERSAMPLE
        inside = (coords >= lo) & (coords <= hi)
        board_big = inside[:, None] & inside[None, :]
        board_alpha = _downsample(board_big)
        img = img * (1 - board_alpha[..., None]) + BOARD_COLOR * board_alpha[..., None]
    for shape, alpha in zip(shapes, alphas):
        img = img * (1 - alpha[..., None]) + shape.color * alpha[..., None]

    # quantize exactly like the PNG on disk, so files alone reproduce everything
    img_q = np.round(np.clip(img, 0.0, 1.0) * 255.0) / 255.0
    image = np.moveaxis(img_q, -1, 0).astype(np.float32)

    pages = []
    if spec.include_board:
        occupied = np.zeros_like(board_big)
        for cov in coverages:
            occupied |= cov
        visible = _downsample(board_big & ~occupied) > 0.5
        pages.append(mask_page_from_array(visible.astype(np.uint8)))
    for alpha in alphas:
        pages.append(mask_page_from_array((alpha > 0.5).astype(np.uint8)))

    regions = []
    for ev in evidence:
        footprint = _downsample(_coverage(ev, size)) > 0.5
        area = int(footprint.sum())
        if area == 0:
            raise DataError("anomaly evidence footprint vanished at image resolution")
        regions.append(GtRegion(mask=footprint, saturation_area=area))

    features = toy_extract(image, patch=8)
    return SceneBundle(
        image=image,
        masks=pages,
        features=features,
        gt_regions=regions,
        label=int(bool(regions)),
        anomaly=spec.anomaly,
        spec=spec,
    )


def toy_extract(image: np.ndarray, patch: int) -> np.ndarray:
    """Patch-statistics features standing in for a pretrained backbone.

    Eight channels per patch cell: mean R, mean G, mean B, edge energy
    (mean absolute in-patch horizontal plus vertical differences of the
    intensity), normalized x, normalized y, mean intensity, and intensity
    variance. Deterministic; position channels make displacement visible.
    """
    if image.ndim != 3 or image.shape[0] != 3:
        raise DataError(f"image must be (3, H, W), got {image.shape}")
    _, h, w = image.shape
    if h % patch or w % patch:
        raise DataError(f"image size {h}x{w} not divisible by patch {patch}")
    hb, wb = h // patch, w // patch
    img = image.astype(np.float64)
    blocks = img.reshape(3, hb, patch, wb, patch)
    mean_rgb = blocks.mean(axis=(2, 4))  # (3, hb, wb)

    intensity = img.mean(axis=0)
    iblk = intensity.reshape(hb, patch, wb, patch)
    dmx = np.abs(np.diff(iblk, axis=3)).mean(axis=(1, 3))
    dmy = np.abs(np.diff(iblk, axis=1)).mean(axis=(1, 3))
    edge = dmx + dmy
    mean_i = iblk.mean(axis=(1, 3))
    var_i = iblk.var(axis=(1, 3))

    ny, nx = np.meshgrid(
        (np.arange(hb) + 0.5) / hb, (np.arange(wb) + 0.5) / wb, indexing="ij"
    )
    feats = np.stack(
        [mean_rgb[0], mean_rgb[1], mean_rgb[2], edge, nx, ny, mean_i, var_i]
    )
    return feats.astype(np.float32)


# -- suite + disk layout -------------------------------------------------------

GT_NAME = "gt.json"
IMAGE_NAME = "image.png"
FEATURES_NAME = "features.sltf"
MASKS_NAME = "masks.sltf"
REGIONS_NAME = "gt_regions.sltf"


def emit_scene(bundle: SceneBundle, out_dir: str | Path) -> Path:
    """Write one scene bundle as PNG + .sltf files + gt.json."""
    from PIL import Image

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rgb = np.moveaxis(bundle.image, 0, -1)
    Image.fromarray(np.round(rgb * 255.0).astype(np.uint8)).save(out / IMAGE_NAME)
    tensor_store.write_tensor(bundle.features, out / FEATURES_NAME)
    tensor_store.save_mask_set([p.mask for p in bundle.masks], out / MASKS_NAME)
    gt = {
        "label": bundle.label,
        "anomaly": bundle.anomaly,
        "num_objects": len(bundle.masks),
        "regions": [
            {"page": i, "saturation_area": r.saturation_area}
            for i, r in enumerate(bundle.gt_regions)
        ],
    }
    if bundle.gt_regions:
        tensor_store.save_mask_set(
            [r.mask.astype(np.uint8) for r in bundle.gt_regions], out / REGIONS_NAME
        )
    (out / GT_NAME).write_text(json.dumps(gt, indent=2, sort_keys=True) + "\n")
    return out


def load_scene_gt(scene_dir: str | Path) -> tuple[int, list[GtRegion], str]:
    """Read label, regions, and anomaly kind back from an emitted scene."""
    scene_dir = Path(scene_dir)
    gt = json.loads((scene_dir / GT_NAME).read_text())
    regions = []
    if gt["regions"]:
        pages = tensor_store.read_tensor(scene_dir / REGIONS_NAME)
        for entry in gt["regions"]:
            regions.append(
                GtRegion(
                    mask=pages[entry["page"]].astype(bool),
                    saturation_area=entry["saturation_area"],
                )
            )
    return int(gt["label"]), regions, gt.get("anomaly", "none")


def standard_suite(
    n_templates: int = 20,
    n_normal: int = 30,
    n_per_anomaly: int = 6,
    base_spec: SceneSpec | None = None,
) -> tuple[list[SceneSpec], list[SceneSpec]]:
    """Fixed-seed template and evaluation specs for the synthetic benchmark."""
    base = base_spec or SceneSpec()
    templates = [replace(base, anomaly="none", seed=1000 + i) for i in range(n_templates)]
    evals = [replace(base, anomaly="none", seed=2000 + i) for i in range(n_normal)]
    kinds = [a for a in ANOMALIES if a != "none"]
    seed = 3000
    for kind in kinds:
        for _ in range(n_per_anomaly):
            evals.append(replace(base, anomaly=kind, seed=seed))
            seed += 1
    return templates, evals


def emit_suite(out_dir: str | Path, templates: list[SceneSpec], evals: list[SceneSpec]) -> None:
    """Emit a full suite under out_dir/templates and out_dir/eval."""
    out = Path(out_dir)
    for i, spec in enumerate(templates):
        emit_scene(generate_scene(spec), out / "templates" / f"template_{i:04d}")
    for i, spec in enumerate(evals):
        name = f"eval_{i:04d}_{spec.anomaly}"
        emit_scene(generate_scene(spec), out / "eval" / name)
