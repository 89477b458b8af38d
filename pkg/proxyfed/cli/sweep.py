"""Sweep command: run the cross-product of config values over several seeds."""

import concurrent.futures
import time
from pathlib import Path
from typing import Annotated, Any

import typer
from rich.markup import escape
from rich.table import Table

from proxyfed.config import (
    ConfigurationError,
    RunConfigFile,
    build_run_config,
    read_config_data,
    settings,
)
from proxyfed.datagen import DatasetError, PartitionError
from proxyfed.metrics import SweepCell, write_sweep_summary

from .main import app, console
from .utils import cell_dirname, parse_sweep, sweep_cells, write_run_outputs

SWEEP_SUMMARY_FILENAME = "sweep_summary.csv"


def _run_job(run_cfg: RunConfigFile, out_dir: Path, omit_wall_time: bool) -> float | None:
    """Run one (cell, seed) job, write its outputs and return its final accuracy."""
    from proxyfed.federation.runner import run_federation

    started = time.perf_counter()
    result = run_federation(run_cfg.federation_config(), threads=1)
    write_run_outputs(
        result, run_cfg, out_dir, time.perf_counter() - started, omit_wall_time=omit_wall_time
    )
    return result.metrics[-1].test_accuracy if result.metrics else None


@app.command()
def sweep(
    config: Annotated[Path, typer.Option("--config", "-c", help="Base run configuration (JSON)")],
    axes: Annotated[
        list[str],
        typer.Option("--sweep", help="Sweep axis key=v1,v2,... (repeatable, cross-product)"),
    ],
    seeds: Annotated[
        int, typer.Option("--seeds", min=1, help="Seeds per cell: master_seed, master_seed+1, ...")
    ] = 1,
    overrides: Annotated[
        list[str] | None,
        typer.Option("--set", "-s", help="Override a base config key (key=value), repeatable"),
    ] = None,
    out: Annotated[
        Path | None, typer.Option("--out", "-o", help="Output directory (default: settings)")
    ] = None,
    omit_wall_time: Annotated[
        bool, typer.Option("--omit-wall-time", help="Write 0 for wall time (byte-stable CSVs)")
    ] = False,
) -> None:
    """
    Run a grid of experiments and summarize final accuracy per cell.

    Every (cell, seed) configuration is validated before the first run starts.
    Outputs go to <out>/<cell>/seed-<n>/ plus <out>/sweep_summary.csv.
    """
    from proxyfed.federation.runner import DivergenceError

    try:
        data = read_config_data(config, overrides)
        base = build_run_config(data)
        parsed = parse_sweep(axes)
        cells = sweep_cells(parsed)
        jobs: list[tuple[int, int, RunConfigFile]] = []
        for index, values in enumerate(cells):
            for offset in range(seeds):
                seed = base.master_seed + offset
                cell_cfg = build_run_config({**data, **values, "master_seed": seed})
                jobs.append((index, seed, cell_cfg))
    except ConfigurationError as e:
        console.print(f"[red]Error:[/red] {escape(str(e))}")
        raise typer.Exit(1)

    out_dir = out or Path(settings().output_dir)
    workers = max(1, min(settings().threads, len(jobs)))
    console.print(f"Running {len(cells)} cell(s) x {seeds} seed(s) on {workers} worker(s)")

    accuracies: dict[tuple[int, int], float | None] = {}
    try:
        with concurrent.futures.ThreadPoolExecutor(
            max_workers=workers, thread_name_prefix="proxyfed-sweep"
        ) as executor:
            futures = {
                (index, seed): executor.submit(
                    _run_job,
                    run_cfg,
                    out_dir / cell_dirname(index, cells[index]) / f"seed-{seed}",
                    omit_wall_time,
                )
                for index, seed, run_cfg in jobs
            }
            for key, future in futures.items():
                accuracies[key] = future.result()
    except (DatasetError, PartitionError, DivergenceError, OSError) as e:
        console.print(f"[red]Error:[/red] {escape(str(e))}")
        raise typer.Exit(1)

    summary = _summarize(cells, jobs, accuracies)
    keys = [key for key, _ in parsed]
    write_sweep_summary(summary, keys, out_dir / SWEEP_SUMMARY_FILENAME)
    _display_summary(summary, keys)


def _summarize(
    cells: list[dict[str, Any]],
    jobs: list[tuple[int, int, RunConfigFile]],
    accuracies: dict[tuple[int, int], float | None],
) -> list[SweepCell]:
    summary = []
    for index, values in enumerate(cells):
        cell_seeds = [seed for i, seed, _ in jobs if i == index]
        finals = [accuracies[(index, s)] for s in cell_seeds]
        summary.append(
            SweepCell(
                index=index,
                values=values,
                seeds=cell_seeds,
                final_accuracies=[a for a in finals if a is not None],
            )
        )
    return summary


def _display_summary(cells: list[SweepCell], keys: list[str]) -> None:
    """Display the per-cell summary in a table."""
    table = Table(title="Sweep summary")
    table.add_column("Cell", justify="right", style="dim")
    for key in keys:
        table.add_column(key, style="cyan")
    table.add_column("Seeds", justify="right")
    table.add_column("Final accuracy", justify="right", style="green")

    for cell in cells:
        accuracy = (
            f"{cell.mean_accuracy:.4f} ± {cell.std_accuracy:.4f}" if cell.final_accuracies else "-"
        )
        table.add_row(
            str(cell.index),
            *(escape(str(cell.values[key])) for key in keys),
            str(len(cell.seeds)),
            accuracy,
        )
    console.print(table)
