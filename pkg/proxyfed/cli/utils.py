"""Shared helpers for CLI commands."""

import itertools
import re
from pathlib import Path
from typing import Any

from proxyfed.config import ConfigurationError, RunConfigFile, config_keys, parse_override
from proxyfed.federation.runner import FederationResult
from proxyfed.metrics import summarize_run, write_metrics_csv, write_summary_json


def parse_sweep(items: list[str]) -> list[tuple[str, list[Any]]]:
    """
    Parse `key=v1,v2,...` sweep axes.

    Values are decoded like `--set` values (JSON scalars, else strings).

    Raises:
        ConfigurationError: On an unknown key, a repeated key or an empty value list.
    """
    known = config_keys()
    axes: list[tuple[str, list[Any]]] = []
    for item in items:
        key, raw = parse_override(item)
        if key not in known:
            raise ConfigurationError(f"Unknown sweep key '{key}'")
        if key in (k for k, _ in axes):
            raise ConfigurationError(f"Sweep key '{key}' given twice")
        raw_text = item.split("=", 1)[1].strip()
        parts = [p.strip() for p in raw_text.split(",") if p.strip()]
        if not parts:
            raise ConfigurationError(f"Sweep key '{key}' has no values")
        axes.append((key, [parse_override(f"{key}={p}")[1] for p in parts]))
    return axes


def sweep_cells(axes: list[tuple[str, list[Any]]]) -> list[dict[str, Any]]:
    """Cross-product of the sweep axes, first axis varying slowest."""
    keys = [key for key, _ in axes]
    return [dict(zip(keys, combo)) for combo in itertools.product(*(v for _, v in axes))]


def cell_dirname(index: int, values: dict[str, Any]) -> str:
    """Directory name for a sweep cell, e.g. `cell-000_dirichlet_alpha-0.1`."""
    parts = [f"cell-{index:03d}"]
    for key, value in values.items():
        parts.append(f"{key}-{value}")
    return re.sub(r"[^A-Za-z0-9._-]+", "_", "_".join(parts))


def write_run_outputs(
    result: FederationResult,
    run_cfg: RunConfigFile,
    out_dir: Path,
    wall_time: float,
    omit_wall_time: bool = False,
) -> tuple[Path, Path]:
    """
    Write metrics CSV and summary JSON for a finished run.

    Returns:
        Tuple of (metrics path, summary path).
    """
    out_dir = Path(out_dir)
    metrics_path = out_dir / run_cfg.metrics_filename
    summary_path = out_dir / run_cfg.summary_filename
    write_metrics_csv(result.metrics, metrics_path, omit_wall_time=omit_wall_time)
    summary = summarize_run(
        result.metrics,
        run_cfg.model_dump(mode="json"),
        0.0 if omit_wall_time else wall_time,
    )
    write_summary_json(summary, summary_path)
    return metrics_path, summary_path
