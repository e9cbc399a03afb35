"""Command line entry points: experiment, depth-summary, report."""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .harness import (
    depth_summary,
    depth_summary_csv,
    emit_report,
    load_config,
    output_directory,
    parse_report,
    run_experiment,
    write_experiment_outputs,
)


def _cmd_experiment(args) -> int:
    config = load_config(args.config)
    output = run_experiment(config)
    directory = output_directory(args.output)
    paths = write_experiment_outputs(output, directory)
    print(f"wrote {len(paths)} files to {directory}")
    for row in output.rows:
        print(
            f"{row.family} size {row.size_requested} (realized {row.size_realized}): "
            f"baseline {row.f1_baseline:.4f} -> {row.f1_new:.4f} "
            f"(delta {row.delta_f1:.2f}%)"
        )
    return 0


def _cmd_depth_summary(args) -> int:
    rows_path = os.path.join(args.results_dir, "rows.json")
    with open(rows_path, "r", encoding="utf-8") as fh:
        rows = parse_report(fh.read(), "json")
    summary = depth_summary(
        rows, n_total=args.points, rng=np.random.default_rng(args.seed)
    )
    out_path = os.path.join(args.results_dir, "depth_kde.csv")
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(depth_summary_csv(summary))
    print(f"allocations: {summary.allocations}")
    print(f"wrote {out_path}")
    return 0


def _cmd_report(args) -> int:
    rows_path = os.path.join(args.results_dir, "rows.json")
    with open(rows_path, "r", encoding="utf-8") as fh:
        rows = parse_report(fh.read(), "json")
    sys.stdout.write(emit_report(rows, args.format))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="traindist",
        description="Search for the training distribution that suits a size-constrained model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_exp = sub.add_parser("experiment", help="run the search described by a config file")
    p_exp.add_argument("config", help="path to a flat key = value config document")
    p_exp.add_argument(
        "--output",
        default=None,
        help="output directory (default: $TRAINDIST_OUTPUT_DIR or ./traindist-results)",
    )
    p_exp.set_defaults(func=_cmd_experiment)

    p_depth = sub.add_parser(
        "depth-summary", help="pool depth draws from finished results into a KDE curve"
    )
    p_depth.add_argument("results_dir", help="directory containing rows.json")
    p_depth.add_argument("--points", type=int, default=10000)
    p_depth.add_argument("--seed", type=int, default=0)
    p_depth.set_defaults(func=_cmd_depth_summary)

    p_rep = sub.add_parser("report", help="print finished results as CSV or JSON")
    p_rep.add_argument("results_dir", help="directory containing rows.json")
    p_rep.add_argument("--format", choices=("csv", "json"), default="csv")
    p_rep.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
