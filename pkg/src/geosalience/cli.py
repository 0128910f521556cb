"""Command-line entry point.

Subcommands mirror the pipeline stages (ingest, gazetteer, extract,
timeline, features, fit, report), plus `simulate` for synthetic corpora and
`run` for the whole chain. Exit codes: 0 success, 2 config error, 3 stage
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .pipeline import (ConfigError, RunConfig, StageError, run,
                       stage_extract, stage_features, stage_fit,
                       stage_gazetteer, stage_ingest, stage_report,
                       stage_timeline)
from .simulate import SyntheticSpec, simulate

STAGE_COMMANDS = {
    "ingest": stage_ingest,
    "gazetteer": stage_gazetteer,
    "extract": stage_extract,
    "timeline": stage_timeline,
    "features": stage_features,
    "fit": stage_fit,
    "report": stage_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geosalience",
        description="Corpus analytics for descriptor phrases on location mentions.")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in (*STAGE_COMMANDS, "run"):
        stage_parser = sub.add_parser(name, help=f"run the {name} stage"
                                      if name != "run" else "run all stages")
        stage_parser.add_argument("-c", "--config", required=True,
                                  help="run config (JSON)")
        stage_parser.add_argument("--corpus", action="append",
                                  help="override corpus path(s)")
        stage_parser.add_argument("--gazetteer", help="override gazetteer dump path")
        stage_parser.add_argument("--regions", help="override region config path")
        stage_parser.add_argument("--aliases", help="override state alias table path")
        stage_parser.add_argument("--organization-rules",
                                  help="override organization rule file")
        stage_parser.add_argument("--outdir", help="override output directory")
        stage_parser.add_argument("--seed", type=int, help="override seed")
        stage_parser.add_argument("--t-buffer", type=int, help="override peak buffer days")
        stage_parser.add_argument("--min-dates", type=int,
                                  help="override sparse-location threshold")
        stage_parser.add_argument("--rare-threshold", type=int,
                                  help="override RARE binning threshold")
        stage_parser.add_argument("--active-percentile", type=float,
                                  help="override active-author percentile")
        stage_parser.add_argument("--l2", type=float, help="override l2 penalty weight")
        stage_parser.add_argument("--lenient", action="store_true",
                                  help="ignore unknown fields during ingestion")

    sim = sub.add_parser("simulate", help="generate a synthetic corpus")
    sim.add_argument("-s", "--spec", help="synthetic spec (JSON); defaults used if omitted")
    sim.add_argument("-o", "--outdir", required=True)
    sim.add_argument("--seed", type=int, help="override seed")
    return parser


def _load_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.from_file(args.config)
    if args.corpus:
        cfg.corpus_paths = [Path(p) for p in args.corpus]
    for flag, attr in (("gazetteer", "gazetteer_path"), ("regions", "regions_path"),
                       ("aliases", "aliases_path"),
                       ("organization_rules", "organization_rules_path"),
                       ("outdir", "outdir")):
        value = getattr(args, flag)
        if value:
            setattr(cfg, attr, Path(value))
    if args.seed is not None:
        cfg.seed = args.seed
    for flag, attr in (("t_buffer", "t_buffer"), ("min_dates", "min_dates"),
                       ("rare_threshold", "rare_threshold"),
                       ("active_percentile", "active_percentile"),
                       ("l2", "l2_weight")):
        value = getattr(args, flag)
        if value is not None:
            setattr(cfg, attr, value)
    if args.lenient:
        cfg.strict = False
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            raw = {}
            if args.spec:
                raw = json.loads(Path(args.spec).read_text(encoding="utf-8"))
            if args.seed is not None:
                raw["seed"] = args.seed
            spec = SyntheticSpec.from_dict(raw)
            paths = simulate(spec, args.outdir)
            print(json.dumps({name: str(path) for name, path in sorted(paths.items())},
                             indent=2))
            return 0
        cfg = _load_config(args)
        if args.command == "run":
            report = run(cfg)
            print(json.dumps(report, indent=2, sort_keys=True))
            return 0
        result = STAGE_COMMANDS[args.command](cfg)
        print(json.dumps({args.command: result}, indent=2, sort_keys=True))
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"{exc}", file=sys.stderr)
        return 3
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
