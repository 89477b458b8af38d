"""
Tests for round metrics, CSV/JSON outputs and sweep summaries.
"""

import csv
import json

import pytest
from pydantic import ValidationError

from proxyfed.metrics import (
    CSV_COLUMNS,
    RoundMetrics,
    SweepCell,
    format_value,
    read_metrics_csv,
    rounds_to_reach,
    summarize_run,
    write_metrics_csv,
    write_summary_json,
    write_sweep_summary,
)


def _row(round_index: int, accuracy: float, **overrides) -> RoundMetrics:
    values = dict(
        round=round_index,
        test_accuracy=accuracy,
        pseudo_label_accuracy=None,
        excluded_count=2,
        unlabeled_seen=10,
        loss_s=1.0,
        loss_u=0.5,
        loss_icpl=0.25,
        loss_gpt=0.1,
        comm_cost=9090,
        wall_time=0.123,
    )
    values.update(overrides)
    return RoundMetrics(**values)


class TestRoundMetrics:
    """Test the metrics row model."""

    def test_rounds_start_at_one(self):
        """Test that round 0 is rejected."""
        with pytest.raises(ValidationError):
            _row(0, 0.5)

    def test_accuracy_bounded(self):
        """Test that accuracy must lie in [0, 1]."""
        with pytest.raises(ValidationError):
            _row(1, 1.5)

    @pytest.mark.parametrize("field", ["loss_s", "loss_u", "loss_icpl", "loss_gpt"])
    def test_non_finite_losses_rejected(self, field):
        """Test that NaN and infinite losses cannot be recorded."""
        for value in (float("nan"), float("inf")):
            with pytest.raises(ValidationError):
                _row(1, 0.5, **{field: value})


class TestFormatValue:
    """Test CSV cell formatting."""

    def test_float_full_precision(self):
        """Test that floats keep 17 significant digits."""
        assert format_value(0.1) == "0.10000000000000001"
        assert float(format_value(1 / 3)) == 1 / 3

    def test_none_is_empty(self):
        """Test that an absent value is an empty cell."""
        assert format_value(None) == ""

    def test_int_and_bool(self):
        """Test integers and booleans."""
        assert format_value(9090) == "9090"
        assert format_value(True) == "1"


class TestMetricsCsv:
    """Test the per-round CSV."""

    def test_header_and_rows(self, tmp_path):
        """Test the fixed header and one line per round."""
        path = tmp_path / "out" / "metrics.csv"
        write_metrics_csv([_row(1, 0.5), _row(2, 0.75, pseudo_label_accuracy=0.9)], path)
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert len(lines) == 3

        rows = read_metrics_csv(path)
        assert rows[0]["round"] == "1"
        assert rows[0]["pseudo_label_accuracy"] == ""
        assert float(rows[1]["pseudo_label_accuracy"]) == 0.9
        assert rows[1]["comm_cost"] == "9090"

    def test_omit_wall_time(self, tmp_path):
        """Test that wall time is written as 0 on request."""
        path = tmp_path / "metrics.csv"
        write_metrics_csv([_row(1, 0.5)], path, omit_wall_time=True)
        assert read_metrics_csv(path)[0]["wall_time"] == "0"

    def test_floats_round_trip_exactly(self, tmp_path):
        """Test that written floats parse back to the same value."""
        path = tmp_path / "metrics.csv"
        write_metrics_csv([_row(1, 2 / 3, loss_s=1e-17 + 0.3)], path)
        row = read_metrics_csv(path)[0]
        assert float(row["test_accuracy"]) == 2 / 3
        assert float(row["loss_s"]) == 1e-17 + 0.3


class TestSummary:
    """Test the run summary document."""

    def test_summarize(self):
        """Test final values, means over present values and totals."""
        metrics = [
            _row(1, 0.5, lc_recall=0.8, lc_top1_accuracy=0.4),
            _row(2, 0.7, lc_recall=None, lc_top1_accuracy=None, pseudo_label_accuracy=0.95),
            _row(3, 0.9, lc_recall=0.6, lc_top1_accuracy=0.2, pseudo_label_accuracy=0.97),
        ]
        summary = summarize_run(metrics, {"master_seed": 4, "rounds": 3}, 1.5)
        assert summary["final_accuracy"] == 0.9
        assert summary["final_pseudo_label_accuracy"] == 0.97
        assert summary["rounds"] == 3
        assert summary["master_seed"] == 4
        assert summary["mean_lc_recall"] == pytest.approx(0.7)
        assert summary["mean_lc_top1_accuracy"] == pytest.approx(0.3)
        assert summary["total_excluded"] == 6
        assert summary["config"] == {"master_seed": 4, "rounds": 3}

    def test_summarize_no_rounds(self):
        """Test the summary of a T=0 run."""
        summary = summarize_run([], {"master_seed": 1}, 0.0)
        assert summary["final_accuracy"] is None
        assert summary["rounds"] == 0

    def test_write_json(self, tmp_path):
        """Test that the summary is written as sorted, indented JSON."""
        path = tmp_path / "summary.json"
        write_summary_json({"b": 1, "a": None}, path)
        text = path.read_text()
        assert json.loads(text) == {"a": None, "b": 1}
        assert text.index('"a"') < text.index('"b"')


class TestSweepSummary:
    """Test sweep aggregation."""

    def test_cell_statistics(self):
        """Test mean and population std of final accuracies."""
        cell = SweepCell(index=0, values={}, seeds=[0, 1], final_accuracies=[0.5, 0.7])
        assert cell.mean_accuracy == pytest.approx(0.6)
        assert cell.std_accuracy == pytest.approx(0.1)

    def test_write(self, tmp_path):
        """Test one row per cell with the swept values."""
        cells = [
            SweepCell(index=i, values={"dirichlet_alpha": a}, seeds=[0, 1],
                      final_accuracies=[0.8, 0.9])
            for i, a in enumerate([0.1, 0.5, 1])
        ]
        path = tmp_path / "sweep_summary.csv"
        write_sweep_summary(cells, ["dirichlet_alpha"], path)
        with path.open(newline="") as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 3
        assert [r["dirichlet_alpha"] for r in rows] == ["0.10000000000000001", "0.5", "1"]
        assert all(r["seeds"] == "2" for r in rows)
        assert float(rows[0]["mean_final_accuracy"]) == pytest.approx(0.85)


class TestRoundsToReach:
    """Test the convergence-speed helper."""

    def test_first_round_at_target(self):
        """Test the first round at or above the target."""
        metrics = [_row(1, 0.4), _row(2, 0.8), _row(3, 0.9)]
        assert rounds_to_reach(metrics, 0.8) == 2

    def test_never_reached(self):
        """Test None when the target is never reached."""
        assert rounds_to_reach([_row(1, 0.4)], 0.5) is None
