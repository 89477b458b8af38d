"""
Evaluation of the global model and of pseudo-labeling quality.
"""

from dataclasses import dataclass

import numpy as np

from proxyfed.client.categories import indecisive_membership, verdicts_from_probs
from proxyfed.client.training import ClientRoundStats
from proxyfed.datagen import SampleSet
from proxyfed.model.core import ModelParams, predict
from proxyfed.server.state import GlobalState
from proxyfed.utils import XiRule


def evaluate_global(state: GlobalState | ModelParams, test: SampleSet) -> float:
    """
    Test accuracy of the global model on raw (unaugmented) inputs.

    Raises:
        ValueError: If the test set is empty.
    """
    if len(test) == 0:
        raise ValueError("Cannot evaluate on an empty test set")
    params = state.params if isinstance(state, GlobalState) else state
    predictions = np.argmax(predict(params, test.features), axis=1)
    return float(np.mean(predictions == test.labels))


def pseudo_label_accuracy(stats: list[ClientRoundStats]) -> float | None:
    """Fraction of the round's high-confidence samples whose pseudo-label is correct."""
    total = sum(s.hc_count for s in stats)
    if total == 0:
        return None
    return sum(s.hc_correct for s in stats) / total


def low_confidence_rates(stats: list[ClientRoundStats]) -> tuple[float | None, float | None]:
    """(recall of the indecisive sets, top-1 accuracy) over the round's low-confidence samples."""
    total = sum(s.lc_count for s in stats)
    if total == 0:
        return None, None
    in_xi = sum(s.lc_in_xi for s in stats)
    top1 = sum(s.lc_top1_correct for s in stats)
    return in_xi / total, top1 / total


@dataclass(frozen=True)
class RecallReport:
    """Indecisive-set quality on a workload's low-confidence samples."""

    num_samples: int
    num_low_confidence: int
    recall: float | None
    top1_accuracy: float | None
    mean_set_size: float | None

    @property
    def low_confidence_fraction(self) -> float:
        return self.num_low_confidence / self.num_samples if self.num_samples else 0.0


def indecisive_recall(
    probs: np.ndarray,
    true_labels: np.ndarray,
    prior: np.ndarray,
    tau: float,
    rule: XiRule = XiRule.PRIOR,
) -> RecallReport:
    """
    Compare indecisive-set recall with top-1 accuracy on low-confidence samples.

    Args:
        probs: Model probabilities for a workload, shape (n, C).
        true_labels: Hidden labels, shape (n,).
        prior: Global prior used as per-class thresholds.
        tau: Confidence threshold.
        rule: Indecisive-set construction rule.
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    true_labels = np.asarray(true_labels, dtype=np.int64)
    high, pseudo = verdicts_from_probs(probs, tau)
    low = ~high
    count = int(low.sum())
    if count == 0:
        return RecallReport(len(probs), 0, None, None, None)
    membership = indecisive_membership(probs[low], prior, rule)
    truth = true_labels[low]
    return RecallReport(
        num_samples=len(probs),
        num_low_confidence=count,
        recall=float(membership[np.arange(count), truth].mean()),
        top1_accuracy=float((pseudo[low] == truth).mean()),
        mean_set_size=float(membership.sum(axis=1).mean()),
    )
