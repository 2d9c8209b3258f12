"""Command-line interface.

Subcommands: ``lad bank-build``, ``lad detect``, ``lad eval``, ``lad synth``.
Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import bank as bank_mod
from . import pipeline, synthlab
from .config import PipelineConfig, load_config
from .errors import ConfigError, DataError, LadError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="JSON profile")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")


def _load(args) -> PipelineConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if getattr(args, "upsample_factor", None) is not None:
        config.upsample.factor = args.upsample_factor
    if getattr(args, "sigma_spatial", None) is not None:
        config.upsample.sigma_spatial = args.sigma_spatial
    if getattr(args, "sigma_range", None) is not None:
        config.upsample.sigma_range = args.sigma_range
    if getattr(args, "ablate", None):
        config = _apply_ablation(config, args.ablate)
    return config


def _apply_ablation(config, spec: str):
    key, _, value = spec.partition("=")
    if key != "dcga" or value not in ("gmp", "gap", "dcga"):
        raise ConfigError(f"unsupported ablation {spec!r}; expected dcga=gmp|gap|dcga")
    dcga = replace(config.dcga)
    if value == "dcga":
        dcga.variant = config.dcga.variant if config.dcga.variant != "none" else "gated"
    else:
        dcga.pool_mode = value
        dcga.variant = "none"
    config.dcga = dcga
    return config


def cmd_bank_build(args) -> int:
    config = _load(args)
    if args.coreset is not None:
        config.coreset_size = args.coreset
    template_dirs = pipeline.scene_dirs_in(args.templates)
    manifest = pipeline.build_bank_dir(template_dirs, args.out, config)
    print(f"bank written: {manifest}")
    return EXIT_OK


def cmd_detect(args) -> int:
    config = _load(args)
    bank, sources = bank_mod.load_bank(args.bank)
    result = pipeline.detect_scene(
        args.query, bank, sources, config, lightweight=args.lightweight
    )
    query = pipeline.load_scene_dir(args.query)
    pipeline.write_detection(result, query, args.out)
    print(f"image_score={result.report['image_score']:.6f} -> {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _load(args)
    bank, sources = bank_mod.load_bank(args.bank)
    report = pipeline.eval_dataset(
        args.dataset,
        bank,
        sources,
        config,
        out_dir=args.out,
        lightweight=args.lightweight,
        ablation=args.ablate,
        workers=args.workers,
    )
    print(
        f"image_auroc={report['image_auroc']:.4f} "
        f"pixel_spro={report['pixel_spro']:.4f} ({report['num_scenes']} scenes)"
    )
    return EXIT_OK


def _spec_from_json(raw: dict) -> synthlab.SceneSpec:
    try:
        if "palette" in raw:
            raw = dict(raw)
            raw["palette"] = tuple((s, tuple(c)) for s, c in raw["palette"])
        return synthlab.SceneSpec(**raw)
    except TypeError as exc:
        raise ConfigError(f"bad scene spec: {exc}") from exc


def cmd_synth(args) -> int:
    if args.suite:
        templates, evals = synthlab.standard_suite()
        synthlab.emit_suite(args.out, templates, evals)
        print(f"standard suite written under {args.out}")
        return EXIT_OK
    if args.spec is None:
        raise ConfigError("either --spec or --suite is required")
    raw = json.loads(Path(args.spec).read_text())
    if args.seed is not None:
        raw["seed"] = args.seed
    spec = _spec_from_json(raw)
    bundle = synthlab.generate_scene(spec)
    synthlab.emit_scene(bundle, args.out)
    print(f"scene ({spec.anomaly}, seed {spec.seed}) written to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lad", description="zero-shot logical anomaly detection"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bank-build", help="build a template features bank")
    _add_common(p)
    p.add_argument("--templates", type=Path, required=True,
                   help="directory of anomaly-free scene bundles")
    p.add_argument("--out", type=Path, required=True, help="bank output directory")
    p.add_argument("--coreset", type=int, default=None,
                   help="greedy k-center reduction to this many templates")
    p.set_defaults(func=cmd_bank_build)

    p = sub.add_parser("detect", help="detect anomalies in one query scene")
    _add_common(p)
    p.add_argument("--bank", type=Path, required=True)
    p.add_argument("--query", type=Path, required=True, help="query scene directory")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--lightweight", action="store_true",
                   help="score only non-matched objects")
    p.add_argument("--upsample-factor", type=int, default=None)
    p.add_argument("--sigma-spatial", type=float, default=None)
    p.add_argument("--sigma-range", type=float, default=None)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="evaluate a labeled dataset")
    _add_common(p)
    p.add_argument("--bank", type=Path, required=True)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--lightweight", action="store_true")
    p.add_argument("--ablate", type=str, default=None, help="e.g. dcga=gmp")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--upsample-factor", type=int, default=None)
    p.add_argument("--sigma-spatial", type=float, default=None)
    p.add_argument("--sigma-range", type=float, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="emit synthetic scenes")
    p.add_argument("--spec", type=Path, default=None, help="scene spec JSON")
    p.add_argument("--suite", action="store_true",
                   help="emit the fixed-seed benchmark suite")
    p.add_argument("--seed", type=int, default=None, help="override spec seed")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except LadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def synthlab_main(argv: list[str] | None = None) -> int:
    """``synthlab emit --spec spec.json --out dir`` alias for ``lad synth``."""
    parser = argparse.ArgumentParser(prog="synthlab")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("emit", help="emit a synthetic scene or suite")
    p.add_argument("--spec", type=Path, default=None)
    p.add_argument("--suite", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=Path, required=True)
    args = parser.parse_args(argv)
    try:
        return cmd_synth(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
