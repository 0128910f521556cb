"""CLI: annotate raw dumps, emit label-map reports, diff fit artifacts."""

from __future__ import annotations

import argparse
import json
import sys

from .annotate import ToolchainConfig, annotate
from .compare import diff_fit_reports
from .labelmap import label_map_report
from .toolchains import ToolchainUnavailable, available_toolchains, get_toolchain


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corpus-annotate",
        description="Convert raw post dumps into the annotated interchange format.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("annotate", help="annotate a raw dump")
    run.add_argument("-i", "--input", required=True, help="raw posts (JSONL)")
    run.add_argument("-o", "--output", required=True, help="interchange output path")
    run.add_argument("-c", "--toolchain-config", required=True,
                     help="toolchain config (JSON: toolchain, location_lexicon)")
    run.add_argument("--label-map-report", help="also write the mapping table here")

    report = sub.add_parser("label-map", help="emit a toolchain's label mapping")
    report.add_argument("-t", "--toolchain", required=True,
                        choices=available_toolchains())
    report.add_argument("-o", "--output", required=True)

    diff = sub.add_parser("diff-fits", help="sign/significance diff of two fit artifacts")
    diff.add_argument("fit_a")
    diff.add_argument("fit_b")
    diff.add_argument("-o", "--output", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "annotate":
            config = ToolchainConfig.from_file(args.toolchain_config)
            with open(args.input, encoding="utf-8") as handle:
                result = annotate(handle, config, args.output,
                                  report_path=args.label_map_report)
            print(json.dumps({"annotated": result.annotated,
                              "skipped": len(result.skipped)}))
            return 0
        if args.command == "label-map":
            label_map_report(get_toolchain(args.toolchain).label_map, args.output)
            print(args.output)
            return 0
        summary = diff_fit_reports(args.fit_a, args.fit_b, args.output)
        print(json.dumps(summary))
        return 0
    except ToolchainUnavailable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
