"""Core CLI commands: version, run, gradcheck."""

import time
from pathlib import Path
from typing import Annotated

import typer
from rich.console import Console
from rich.markup import escape
from rich.table import Table

from proxyfed.config import ConfigurationError, load_run_config, settings
from proxyfed.datagen import DatasetError, PartitionError
from proxyfed.logs import setup_logging
from proxyfed.model.core import ShapeError
from proxyfed.version import __version__

from .utils import write_run_outputs

app = typer.Typer(
    name="proxyfed",
    help="ProxyFed - Desk-scale federated semi-supervised learning simulator",
    add_completion=False,
    no_args_is_help=True,
)

console = Console()


@app.callback()
def main_callback() -> None:
    """Configure logging before any command runs."""
    setup_logging()


@app.command()
def version() -> None:
    """Show ProxyFed version."""
    typer.echo(f"ProxyFed v{__version__}")


@app.command()
def run(
    config: Annotated[Path, typer.Option("--config", "-c", help="Run configuration (JSON)")],
    overrides: Annotated[
        list[str] | None,
        typer.Option("--set", "-s", help="Override a config key (key=value), repeatable"),
    ] = None,
    out: Annotated[
        Path | None, typer.Option("--out", "-o", help="Output directory (default: settings)")
    ] = None,
    omit_wall_time: Annotated[
        bool, typer.Option("--omit-wall-time", help="Write 0 for wall time (byte-stable CSVs)")
    ] = False,
    save_params: Annotated[
        Path | None, typer.Option("--save-params", help="Write final global model here")
    ] = None,
    load_params: Annotated[
        Path | None, typer.Option("--load-params", help="Start from this saved model")
    ] = None,
) -> None:
    """
    Run one federated training experiment.

    Writes a per-round metrics CSV and a run summary JSON to the output directory.
    """
    from proxyfed.federation.runner import DivergenceError, run_federation
    from proxyfed.model import checkpoint

    try:
        run_cfg = load_run_config(config, overrides)
    except ConfigurationError as e:
        console.print(f"[red]Error:[/red] {escape(str(e))}")
        raise typer.Exit(1)

    out_dir = out or Path(settings().output_dir)

    initial = None
    if load_params is not None:
        try:
            initial = checkpoint.load_params(load_params)
        except (OSError, ShapeError) as e:
            console.print(
                f"[red]Error:[/red] Cannot load parameters from {load_params}: {escape(str(e))}"
            )
            raise typer.Exit(1)

    started = time.perf_counter()
    try:
        result = run_federation(run_cfg.federation_config(), initial_params=initial)
    except (DatasetError, PartitionError, ShapeError, DivergenceError) as e:
        console.print(f"[red]Error:[/red] {escape(str(e))}")
        raise typer.Exit(1)
    wall_time = time.perf_counter() - started

    try:
        metrics_path, _ = write_run_outputs(result, run_cfg, out_dir, wall_time, omit_wall_time)
        if save_params is not None:
            checkpoint.save_params(result.state.params, save_params)
    except OSError as e:
        console.print(f"[red]Error:[/red] Cannot write outputs: {escape(str(e))}")
        raise typer.Exit(1)

    final = result.metrics[-1].test_accuracy if result.metrics else None
    accuracy = f"{final:.4f}" if final is not None else "-"
    console.print(
        f"[green]✓[/green] {len(result.metrics)} rounds, final accuracy {accuracy}, "
        f"metrics in {metrics_path}"
    )


@app.command()
def gradcheck(
    seed: Annotated[int, typer.Option("--seed", help="Seed of the first instance")] = 0,
    instances: Annotated[
        int, typer.Option("--instances", min=1, help="Random instances per loss")
    ] = 10,
    tolerance: Annotated[
        float, typer.Option("--tolerance", help="Max allowed relative error")
    ] = 1e-5,
) -> None:
    """
    Verify the analytic gradients of all losses against finite differences.

    Exits non-zero if any loss exceeds the tolerance on any instance.
    """
    from proxyfed.diagnostics import run_gradcheck_suite

    report = run_gradcheck_suite(seed=seed, instances=instances, tolerance=tolerance)

    table = Table(title=f"Gradient check ({instances} instances, tolerance {tolerance:g})")
    table.add_column("Loss", style="cyan")
    table.add_column("Max relative error", justify="right")
    table.add_column("Worst seed", justify="right", style="dim")
    table.add_column("Status")
    for result in report.results:
        status = "[green]ok[/green]" if result.passed else "[red]FAILED[/red]"
        table.add_row(
            result.name,
            f"{result.max_relative_error:.3e}",
            str(result.worst_seed),
            status,
        )
    console.print(table)

    if not report.passed:
        for result in report.results:
            if not result.passed:
                seeds = ", ".join(str(s) for s in result.failing_seeds)
                console.print(f"[red]Error:[/red] {result.name} failed at seed(s) {seeds}")
        raise typer.Exit(1)
