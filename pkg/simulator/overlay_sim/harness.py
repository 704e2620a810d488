"""Experiment orchestration: per-run seeds, O_max sweeps, aggregation across runs and output files."""

from __future__ import annotations

import csv
import hashlib
import io
import multiprocessing
import os
import statistics
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional

from overlay_sim import console
from overlay_sim.config import ExperimentConfig
from overlay_sim.engine import format_minutes
from overlay_sim.errors import HarnessError, OutputError
from overlay_sim.metrics import MetricsSnapshot, OverlaySnapshot
from overlay_sim.simulation import Simulation
from overlay_sim.strategy import StrategyKind

METRICS_HEADER = (
    "strategy",
    "omax",
    "run",
    "seed",
    "t",
    "n_alive",
    "n_edges",
    "bottleneck_index",
    "avg_peer_set",
    "diameter",
    "connected",
)
SUMMARY_HEADER = ("strategy", "omax", "t", "metric", "mean", "min", "max")
METRIC_NAMES = ("bottleneck_index", "avg_peer_set", "diameter")


def derive_seed(base_seed: int, strategy: StrategyKind, omax: int, run_index: int) -> int:
    material = f"{base_seed}:{strategy.value}:{omax}:{run_index}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(material).digest()[:8], "big")


def cell_name(strategy: StrategyKind, omax: int, run_index: int) -> str:
    return f"{strategy.value}/omax={omax}/run={run_index}"


@dataclass(frozen=True)
class RunResult:
    strategy: StrategyKind
    omax: int
    run_index: int
    seed: int
    snapshots: list[OverlaySnapshot]
    metrics: list[MetricsSnapshot]
    events_processed: int

    @property
    def cell(self) -> str:
        return cell_name(self.strategy, self.omax, self.run_index)


@dataclass(frozen=True)
class AggregateRow:
    strategy: StrategyKind
    omax: int
    t: str
    metric: str
    mean: float
    min: float
    max: float


@dataclass(frozen=True)
class SweepResult:
    results: list[RunResult]
    aggregates: list[AggregateRow]


def run_single(config: ExperimentConfig, strategy: StrategyKind, omax: int, run_index: int) -> RunResult:
    seed = derive_seed(config.base_seed, strategy, omax, run_index)
    simulation = Simulation(
        config.run_parameters(strategy, omax),
        seed,
        check_invariants=config.check_invariants,
    )
    output = simulation.run(config.snapshot_sim_times, config.horizon_time)
    return RunResult(strategy, omax, run_index, seed, output.snapshots, output.metrics, output.events_processed)


Task = tuple[ExperimentConfig, StrategyKind, int, int]


def _run_task(task: Task) -> RunResult:
    return run_single(*task)


def tasks_for(config: ExperimentConfig) -> list[Task]:
    return [
        (config, strategy, omax, run_index)
        for strategy in config.strategies
        for omax in config.omax_values
        for run_index in range(config.runs)
    ]


def _execute(config: ExperimentConfig, tasks: list[Task]) -> Iterator[RunResult]:
    if config.jobs == 1 or len(tasks) <= 1:
        yield from map(_run_task, tasks)
        return
    with multiprocessing.Pool(min(config.jobs, len(tasks))) as pool:
        # imap keeps task order, so aggregation never depends on scheduling.
        yield from pool.imap(_run_task, tasks)


def sweep(
    config: ExperimentConfig,
    *,
    write_edges: bool = True,
    on_result: Optional[Callable[[RunResult], None]] = None,
) -> SweepResult:
    """Run every (strategy, omax, run) cell; edge lists are written as runs complete.

    A failing run aborts the sweep with HarnessError, leaving the files of earlier runs in place.
    """
    tasks = tasks_for(config)
    console.info(
        f"sweep: {len(config.strategies)} strategies x {len(config.omax_values)} omax values x "
        f"{config.runs} runs = {len(tasks)} runs, jobs={config.jobs}"
    )
    if write_edges:
        ensure_output_dir(config.output_dir)

    results: list[RunResult] = []
    iterator = _execute(config, tasks)
    for _, strategy, omax, run_index in tasks:
        try:
            result = next(iterator)
        except Exception as e:
            raise HarnessError(cell_name(strategy, omax, run_index), e) from e
        if write_edges:
            write_edge_lists(result, config.output_dir)
        results.append(result)
        console.run(f"[{len(results)}/{len(tasks)}] {result.cell} seed={result.seed} {_describe(result.metrics)}")
        if on_result is not None:
            on_result(result)

    return SweepResult(results, aggregate(results))


def _describe(metrics: list[MetricsSnapshot]) -> str:
    if not metrics:
        return "no snapshots"
    last = metrics[-1]
    return (
        f"BI={last.bottleneck_index:.4f} avg_ps={last.avg_peer_set:.2f} "
        f"diameter={last.diameter} connected={str(last.connected).lower()}"
    )


def aggregate(results: Iterable[RunResult]) -> list[AggregateRow]:
    """Mean, min and max of each metric over the runs of a (strategy, omax, t) cell, in first-seen order."""
    groups: dict[tuple[StrategyKind, int, str], dict[str, list[float]]] = {}
    for result in results:
        for m in result.metrics:
            key = (result.strategy, result.omax, format_minutes(m.taken_at))
            values = groups.setdefault(key, {name: [] for name in METRIC_NAMES})
            values["bottleneck_index"].append(m.bottleneck_index)
            values["avg_peer_set"].append(m.avg_peer_set)
            values["diameter"].append(float(m.diameter))

    rows = []
    for (strategy, omax, t), values in groups.items():
        for name in METRIC_NAMES:
            series = values[name]
            rows.append(AggregateRow(strategy, omax, t, name, statistics.mean(series), min(series), max(series)))
    return rows


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def metrics_rows(results: Iterable[RunResult]) -> Iterator[tuple[str, ...]]:
    for r in results:
        for m in r.metrics:
            yield (
                r.strategy.value,
                str(r.omax),
                str(r.run_index),
                str(r.seed),
                format_minutes(m.taken_at),
                str(m.n_alive),
                str(m.n_edges),
                _fmt(m.bottleneck_index),
                _fmt(m.avg_peer_set),
                str(m.diameter),
                "true" if m.connected else "false",
            )


def summary_rows(rows: Iterable[AggregateRow]) -> Iterator[tuple[str, ...]]:
    for row in rows:
        yield (row.strategy.value, str(row.omax), row.t, row.metric, _fmt(row.mean), _fmt(row.min), _fmt(row.max))


def edge_file_name(strategy: StrategyKind, omax: int, run_index: int, snapshot: OverlaySnapshot) -> str:
    return f"matrix_{strategy.value}_omax{omax}_run{run_index}_t{format_minutes(snapshot.taken_at)}.edges"


def ensure_output_dir(path: Path) -> None:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputError(path, e.strerror or str(e)) from e
    if not os.access(path, os.W_OK):
        raise OutputError(path, "directory is not writable")


def write_atomic(path: Path, text: str) -> None:
    """Write to a temporary file beside `path`, then rename it over `path`."""
    tmp_name = None
    try:
        with tempfile.NamedTemporaryFile(
            "w", encoding="utf-8", newline="", dir=path.parent, prefix=f".{path.name}.", delete=False
        ) as tmp:
            tmp_name = tmp.name
            tmp.write(text)
        os.replace(tmp_name, path)
    except OSError as e:
        if tmp_name is not None and os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise OutputError(path, e.strerror or str(e)) from e


def _csv_text(header: tuple[str, ...], rows: Iterable[tuple[str, ...]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def write_edge_lists(result: RunResult, output_dir: Path, *, skip_existing: bool = False) -> list[Path]:
    paths = []
    for snapshot in result.snapshots:
        path = output_dir / edge_file_name(result.strategy, result.omax, result.run_index, snapshot)
        if not (skip_existing and path.exists()):
            write_atomic(path, "".join(f"{i}\t{j}\n" for i, j in snapshot.edges))
        paths.append(path)
    return paths


def write_outputs(rows: list[AggregateRow], results: list[RunResult], output_dir: Path) -> list[Path]:
    """Write metrics.csv and summary.csv, plus any edge list not already on disk."""
    ensure_output_dir(output_dir)
    metrics_path = output_dir / "metrics.csv"
    summary_path = output_dir / "summary.csv"
    write_atomic(metrics_path, _csv_text(METRICS_HEADER, metrics_rows(results)))
    write_atomic(summary_path, _csv_text(SUMMARY_HEADER, summary_rows(rows)))
    written = [metrics_path, summary_path]
    for result in results:
        written.extend(write_edge_lists(result, output_dir, skip_existing=True))
    return written
