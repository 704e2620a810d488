"""Command-line entry point: `overlay-sim` runs an O_max sweep and writes the CSV and edge-list outputs."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Any, Optional

from rich.console import Console
from rich.markup import escape
from rich.table import Table

from overlay_sim import console
from overlay_sim.config import (
    ExperimentConfig,
    build_config,
    load_config_file,
    parse_omax,
    parse_strategy,
    parse_times,
)
from overlay_sim.errors import SimulationError
from overlay_sim.harness import AggregateRow, sweep, write_outputs


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="overlay-sim",
        description="Simulate overlay construction of a BitTorrent-style swarm under a flash crowd.",
    )
    # Every default is None so that only flags actually given override the config file.
    parser.add_argument("--config", type=Path, help="key=value file supplying any of the options below")
    parser.add_argument("--strategy", type=parse_strategy, help="tracker, preemption or both (default tracker)")
    parser.add_argument("--omax", type=parse_omax, help="comma list or start:stop:step (default 5:80:5)")
    parser.add_argument("--runs", type=int, help="independent runs per O_max value (default 10)")
    parser.add_argument("--max-peer-set", type=int, help="maximum peer set size (default 80)")
    parser.add_argument("--min-neighbors", type=int, help="re-announce threshold (default 20)")
    parser.add_argument("--response-size", type=int, help="peers per tracker response (default 80)")
    parser.add_argument("--min-request-interval", type=float, help="minutes between tracker requests (default 5)")
    parser.add_argument("--heartbeat-period", type=float, help="minutes between heartbeats (default 30)")
    parser.add_argument("--expiry-timeout", type=float, help="minutes before a silent peer expires (default 45)")
    parser.add_argument("--first-group-size", type=int, help="join-index boundary of the bottleneck index (default 80)")
    parser.add_argument("--snapshot-times", type=parse_times, help="comma list of minutes (default 10)")
    parser.add_argument("--horizon", type=float, help="simulated minutes per run (default 70)")
    parser.add_argument("--seed", type=int, help="base seed, 0..2^64-1 (default 0)")
    parser.add_argument("--jobs", type=int, help="runs executed in parallel (default: one per CPU)")
    parser.add_argument("--out", type=Path, help="output directory (default results)")
    parser.add_argument("--preemption-cap", type=float, help="fraction of the peer set preemption may fill")
    parser.add_argument(
        "--ungraceful-leaves",
        action="store_true",
        default=None,
        help="departing peers do not tell the tracker",
    )
    parser.add_argument(
        "--check-invariants",
        action="store_true",
        default=None,
        help="validate overlay invariants after every event",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="log every processed event")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="only log errors")
    return parser


_FLAG_FIELDS = {
    "strategy": "strategies",
    "omax": "omax_values",
    "runs": "runs",
    "max_peer_set": "max_peer_set",
    "min_neighbors": "min_neighbors",
    "response_size": "response_size",
    "min_request_interval": "min_request_interval",
    "heartbeat_period": "heartbeat_period",
    "expiry_timeout": "expiry_timeout",
    "first_group_size": "first_group_size",
    "snapshot_times": "snapshot_times",
    "horizon": "horizon",
    "seed": "base_seed",
    "jobs": "jobs",
    "out": "output_dir",
    "preemption_cap": "preemption_cap",
    "ungraceful_leaves": "ungraceful_leaves",
    "check_invariants": "check_invariants",
}


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Defaults, then the config file, then explicit flags."""
    values: dict[str, Any] = load_config_file(args.config) if args.config is not None else {}
    for flag, field in _FLAG_FIELDS.items():
        value = getattr(args, flag)
        if value is not None:
            values[field] = value
    return build_config(values)


def summary_table(rows: list[AggregateRow]) -> Table:
    table = Table(title="Overlay metrics (mean [min, max] over runs)")
    for column in ("strategy", "O_max", "t", "bottleneck index", "avg peer set", "diameter"):
        table.add_column(column, justify="left" if column == "strategy" else "right")

    cells: dict[tuple[str, int, str], dict[str, AggregateRow]] = {}
    for row in rows:
        cells.setdefault((row.strategy.value, row.omax, row.t), {})[row.metric] = row

    def fmt(row: AggregateRow, digits: int) -> str:
        return f"{row.mean:.{digits}f} [{row.min:.{digits}f}, {row.max:.{digits}f}]"

    for (strategy, omax, t), metrics in cells.items():
        table.add_row(
            strategy,
            str(omax),
            t,
            escape(fmt(metrics["bottleneck_index"], 4)),
            escape(fmt(metrics["avg_peer_set"], 2)),
            escape(fmt(metrics["diameter"], 1)),
        )
    return table


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        console.set_level(console.DEBUG)
    elif args.quiet:
        console.set_level(console.ERROR)

    try:
        config = resolve_config(args)
        console.info(f"writing results to {config.output_dir.resolve()}")
        result = sweep(config)
        written = write_outputs(result.aggregates, result.results, config.output_dir)
    except SimulationError as e:
        console.error(escape(str(e)))
        return 1

    console.info(f"wrote {len(written)} files")
    if not args.quiet:
        Console().print(summary_table(result.aggregates))
    return 0


if __name__ == "__main__":
    sys.exit(main())
