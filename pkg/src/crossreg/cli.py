"""Command line interface.

Subcommands: register (two PLY files), bench (synthetic sweep), synth
(materialize synthetic pairs), ablate (toggle sweep). Exit codes: 0 success,
2 registration failed, 3 I/O or parse error, 4 invalid config.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import config as config_mod
from .benchmark import run_benchmark
from .errors import (
    ConfigError,
    CrossRegError,
    EstimationFailedError,
    InvalidArgumentError,
    PlyParseError,
    RegistrationFailedError,
)
from .pipeline import PipelineConfig, run_pipeline
from .ply_io import read_point_cloud, write_correspondence_visualization, write_point_cloud
from .synthetic import SyntheticPairSpec, generate_pair

EXIT_OK = 0
EXIT_REGISTRATION_FAILED = 2
EXIT_IO = 3
EXIT_CONFIG = 4


class _Parser(argparse.ArgumentParser):
    # Argument mistakes are config mistakes per the exit-code contract.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _flag(key: str) -> str:
    return "--" + key.replace(".", "-").replace("_", "-")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE", help="flat key=value config file")
    group = parser.add_argument_group("config overrides")
    for key in config_mod.flat_keys():
        group.add_argument(_flag(key), dest=f"cfg::{key}", metavar="V", default=None)


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    overrides = {
        key.split("::", 1)[1]: value
        for key, value in vars(args).items()
        if key.startswith("cfg::") and value is not None
    }
    return config_mod.build_pipeline_config(args.config, overrides)


def _load_specs(path) -> list[SyntheticPairSpec]:
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = [data]
    if not isinstance(data, list) or not data:
        raise ConfigError(f"spec file {path} must hold a pair spec or a list of them")
    return [SyntheticPairSpec.from_dict(entry) for entry in data]


def _transform_payload(result) -> dict:
    return {
        "rotation": result.transform.rotation.tolist(),
        "translation": result.transform.translation.tolist(),
        "timings": result.timings,
    }


def _cmd_register(args) -> int:
    config = _config_from_args(args)
    source = read_point_cloud(args.source)
    target = read_point_cloud(args.target)
    result = run_pipeline(source, target, config)
    payload = json.dumps(_transform_payload(result), indent=2)
    if args.out:
        Path(args.out).write_text(payload + "\n")
    else:
        print(payload)
    if args.viz:
        write_correspondence_visualization(
            args.viz, source, target, result.correspondences, gt=None,
            tau1=config.thresholds.tau1,
        )
    return EXIT_OK


def _cmd_bench(args) -> int:
    config = _config_from_args(args)
    specs = _load_specs(args.specs)
    report = run_benchmark(specs, config)
    report.write_json(args.report)
    agg = report.aggregates
    print(
        f"pairs={agg.pairs_total} failed={agg.pairs_failed} RR={agg.rr:.3f} "
        f"FMR={agg.fmr:.3f} meanRE={agg.mean_re_deg} meanTE={agg.mean_te}"
    )
    return EXIT_OK


def _cmd_synth(args) -> int:
    specs = _load_specs(args.spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for spec in specs:
        source, target, gt, gt_pairs = generate_pair(spec)
        pair_dir = out_dir / f"pair_{spec.seed:05d}"
        pair_dir.mkdir(exist_ok=True)
        write_point_cloud(pair_dir / "source.ply", source, binary=args.binary)
        write_point_cloud(pair_dir / "target.ply", target, binary=args.binary)
        (pair_dir / "ground_truth.json").write_text(
            json.dumps(
                {
                    "rotation": gt.rotation.tolist(),
                    "translation": gt.translation.tolist(),
                    "gt_pair_count": len(gt_pairs),
                    "spec": spec.to_dict(),
                },
                indent=2,
            )
            + "\n"
        )
        print(f"wrote {pair_dir} ({len(source)} source / {len(target)} target points)")
    return EXIT_OK


ABLATION_ROWS = {
    "full": {},
    "no_msn": {"normalization": "whole"},
    "no_sv": {"spherical_voxels": False, "normalization": "whole"},
    "mnn": {"matcher": "mnn"},
    "no_hcf": {"hcf_enabled": False},
}


def _cmd_ablate(args) -> int:
    config = _config_from_args(args)
    if args.specs:
        specs = _load_specs(args.specs)
    else:
        specs = [
            SyntheticPairSpec(seed=config.seed + i, crop_fraction=0.7)
            for i in range(args.pairs)
        ]
    rows = {}
    for name, toggles in ABLATION_ROWS.items():
        row_config = replace(config, **toggles)
        report = run_benchmark(specs, row_config)
        rows[name] = report.to_dict()
        agg = report.aggregates
        print(f"{name:8s} RR={agg.rr:.3f} FMR={agg.fmr:.3f} meanIR={agg.mean_ir}")
    Path(args.report).write_text(json.dumps(rows, indent=2) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="crossreg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    reg = sub.add_parser("register", parents=[], help="register two PLY clouds")
    reg.add_argument("source")
    reg.add_argument("target")
    reg.add_argument("--out", metavar="FILE", help="write the transform JSON here")
    reg.add_argument("--viz", metavar="FILE", help="write a correspondence PLY here")
    _add_config_flags(reg)
    reg.set_defaults(handler=_cmd_register)

    bench = sub.add_parser("bench", help="run a synthetic benchmark sweep")
    bench.add_argument("--specs", required=True, metavar="FILE", help="JSON pair specs")
    bench.add_argument("--report", required=True, metavar="FILE")
    _add_config_flags(bench)
    bench.set_defaults(handler=_cmd_bench)

    synth = sub.add_parser("synth", help="materialize synthetic pairs to disk")
    synth.add_argument("--spec", required=True, metavar="FILE", help="JSON pair specs")
    synth.add_argument("--out-dir", required=True, metavar="DIR")
    synth.add_argument("--binary", action="store_true", help="write binary PLY")
    synth.set_defaults(handler=_cmd_synth)

    ablate = sub.add_parser("ablate", help="run the five-row toggle sweep")
    ablate.add_argument("--report", required=True, metavar="FILE")
    ablate.add_argument("--specs", metavar="FILE", help="JSON pair specs (optional)")
    ablate.add_argument("--pairs", type=int, default=12, help="pair count when no specs given")
    _add_config_flags(ablate)
    ablate.set_defaults(handler=_cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PlyParseError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (RegistrationFailedError, EstimationFailedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REGISTRATION_FAILED
    except (InvalidArgumentError, CrossRegError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REGISTRATION_FAILED


if __name__ == "__main__":
    raise SystemExit(main())
