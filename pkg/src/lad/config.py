"""Pipeline configuration: one JSON profile per scene category."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .descriptors import DcgaParams
from .errors import ConfigError
from .scorer import ScoreParams

ALLOWED_FACTORS = (1, 2, 4, 8, 16, 32)


@dataclass
class UpsampleConfig:
    factor: int = 8
    sigma_spatial: float = 1.0
    sigma_range: float = 0.15


@dataclass
class MaskFilterConfig:
    min_area_frac: float = 0.001
    max_area_frac: float = 0.95


@dataclass
class DcgaConfig:
    pool_mode: str = "gmp"
    variant: str = "gated"
    kernel: list[float] = field(default_factory=lambda: [1 / 3, 1 / 3, 1 / 3])
    temperature: float = 1.0
    center: bool = True


@dataclass
class MatchConfig:
    # bin_score and threshold are calibrated on the synthetic suite: unit
    # descriptors keep scores in [-1, 1], so the bin must sit well below
    # the score range and the confidence threshold below 1/M.
    bin_score: float = -4.0
    iters: int = 100
    tol: float = 1e-6
    threshold: float = 0.1


@dataclass
class AmmConfig:
    R: int = 32
    epsilon: float = 0.01
    cov_mode: str = "diag"
    channel_subsample: int = 64


@dataclass
class ScoreConfig:
    # mean over the top-q score fraction separates sustained object-sized
    # deviations from thin boundary-jitter spikes better than a plain max
    reduction: str = "mean_topq"
    top_q: float = 0.03


@dataclass
class PipelineConfig:
    category: str = "default"
    seed: int = 0
    k: int = 2
    coreset_size: int | None = None  # None keeps the full bank
    upsample: UpsampleConfig = field(default_factory=UpsampleConfig)
    mask_filter: MaskFilterConfig = field(default_factory=MaskFilterConfig)
    dcga: DcgaConfig = field(default_factory=DcgaConfig)
    match: MatchConfig = field(default_factory=MatchConfig)
    amm: AmmConfig = field(default_factory=AmmConfig)
    score: ScoreConfig = field(default_factory=ScoreConfig)

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ConfigError(f"k must be >= 2, got {self.k}")
        if self.upsample.factor not in ALLOWED_FACTORS:
            raise ConfigError(
                f"upsample factor must be one of {ALLOWED_FACTORS}, "
                f"got {self.upsample.factor}"
            )
        if not 0 <= self.mask_filter.min_area_frac <= self.mask_filter.max_area_frac <= 1:
            raise ConfigError("mask area fractions must satisfy 0 <= min <= max <= 1")

    def dcga_params(self) -> DcgaParams:
        return DcgaParams(
            kernel=np.asarray(self.dcga.kernel, dtype=np.float64),
            pool_mode=self.dcga.pool_mode,
            variant=self.dcga.variant,
            temperature=self.dcga.temperature,
            center=self.dcga.center,
        )

    def score_params(self, out_hw: tuple[int, int] | None = None) -> ScoreParams:
        return ScoreParams(
            r_grid=self.amm.R,
            epsilon=self.amm.epsilon,
            cov_mode=self.amm.cov_mode,
            channel_subsample=self.amm.channel_subsample,
            out_hw=out_hw,
            reduction=self.score.reduction,
            top_q=self.score.top_q,
            seed=self.seed,
        )

    def to_json(self) -> dict:
        return asdict(self)


_SECTIONS = {
    "upsample": UpsampleConfig,
    "mask_filter": MaskFilterConfig,
    "dcga": DcgaConfig,
    "match": MatchConfig,
    "amm": AmmConfig,
    "score": ScoreConfig,
}


def config_from_dict(raw: dict) -> PipelineConfig:
    kwargs: dict = {}
    for key, value in raw.items():
        if key in _SECTIONS:
            try:
                kwargs[key] = _SECTIONS[key](**value)
            except TypeError as exc:
                raise ConfigError(f"bad config section {key!r}: {exc}") from exc
        elif key in ("category", "seed", "k", "coreset_size"):
            kwargs[key] = value
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return PipelineConfig(**kwargs)


def load_config(path: str | Path | None) -> PipelineConfig:
    """Load a profile from JSON; missing path means all defaults."""
    if path is None:
        return PipelineConfig()
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(raw)
