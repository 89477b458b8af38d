"""
Per-round metrics and their on-disk formats.

Provides:
- RoundMetrics: one row of a run's history
- write_metrics_csv / read_metrics_csv: fixed-schema CSV with full-precision floats
- write_summary_json: run summary with the exact config echo
- SweepCell / write_sweep_summary: mean and std of final accuracy per sweep cell
- rounds_to_reach: convergence-speed helper
"""

import csv
import json
import logging
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "round",
    "test_accuracy",
    "pseudo_label_accuracy",
    "excluded_count",
    "loss_s",
    "loss_u",
    "loss_icpl",
    "loss_gpt",
    "comm_cost",
    "wall_time",
)


class RoundMetrics(BaseModel):
    """Metrics recorded after one federated round (rounds are numbered from 1)."""

    model_config = ConfigDict(allow_inf_nan=False)

    round: int = Field(ge=1)
    test_accuracy: float = Field(ge=0, le=1)
    pseudo_label_accuracy: float | None = None
    excluded_count: int = Field(ge=0)
    unlabeled_seen: int = Field(default=0, ge=0)
    loss_s: float
    loss_u: float
    loss_icpl: float
    loss_gpt: float
    comm_cost: int = Field(ge=0)
    wall_time: float = Field(ge=0)
    lc_recall: float | None = None
    lc_top1_accuracy: float | None = None
    gpt_exhausted: bool = False


def format_value(value: Any) -> str:
    """CSV cell text: floats with 17 significant digits, None as an empty cell."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_metrics_csv(
    metrics: list[RoundMetrics], path: Path, omit_wall_time: bool = False
) -> None:
    """
    Write the per-round CSV.

    Args:
        metrics: Rows in round order.
        path: Destination file (parent directories are created).
        omit_wall_time: Write 0 in the wall_time column so repeated runs are byte-identical.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in metrics:
            values = row.model_dump()
            if omit_wall_time:
                values["wall_time"] = 0
            writer.writerow([format_value(values[column]) for column in CSV_COLUMNS])


def read_metrics_csv(path: Path) -> list[dict[str, str]]:
    """Read a metrics CSV back as raw string rows."""
    with Path(path).open(newline="") as f:
        return list(csv.DictReader(f))


def summarize_run(
    metrics: list[RoundMetrics], config: dict[str, Any], wall_time: float
) -> dict[str, Any]:
    """Build the run summary document."""
    final = metrics[-1] if metrics else None
    recalls = [m.lc_recall for m in metrics if m.lc_recall is not None]
    top1 = [m.lc_top1_accuracy for m in metrics if m.lc_top1_accuracy is not None]
    return {
        "final_accuracy": final.test_accuracy if final else None,
        "final_pseudo_label_accuracy": final.pseudo_label_accuracy if final else None,
        "rounds": len(metrics),
        "master_seed": config.get("master_seed"),
        "wall_time": wall_time,
        "mean_lc_recall": float(np.mean(recalls)) if recalls else None,
        "mean_lc_top1_accuracy": float(np.mean(top1)) if top1 else None,
        "total_excluded": int(sum(m.excluded_count for m in metrics)),
        "config": config,
    }


def write_summary_json(summary: dict[str, Any], path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


# =============================================================================
# Sweeps
# =============================================================================


class SweepCell(BaseModel):
    """One point of a sweep's cross-product with its per-seed final accuracies."""

    index: int
    values: dict[str, Any]
    seeds: list[int]
    final_accuracies: list[float]

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.final_accuracies)) if self.final_accuracies else float("nan")

    @property
    def std_accuracy(self) -> float:
        return float(np.std(self.final_accuracies)) if self.final_accuracies else float("nan")


def write_sweep_summary(cells: list[SweepCell], keys: list[str], path: Path) -> None:
    """Write one row per cell: the swept values, seed count, mean and std of final accuracy."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["cell", *keys, "seeds", "mean_final_accuracy", "std_final_accuracy"])
        for cell in cells:
            writer.writerow(
                [
                    cell.index,
                    *(format_value(cell.values[key]) for key in keys),
                    len(cell.seeds),
                    format_value(cell.mean_accuracy),
                    format_value(cell.std_accuracy),
                ]
            )


def rounds_to_reach(metrics: list[RoundMetrics], target: float) -> int | None:
    """First round whose test accuracy is >= target, or None."""
    for row in metrics:
        if row.test_accuracy >= target:
            return row.round
    return None
