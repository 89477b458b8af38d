"""
Federation: round orchestration, evaluation and ablation presets.
"""

from .evaluation import (
    RecallReport,
    evaluate_global,
    indecisive_recall,
    low_confidence_rates,
    pseudo_label_accuracy,
)
from .runner import DivergenceError, FederationResult, initial_model, run_federation, run_round
from .variants import VARIANTS, apply_variant, variant_overrides

__all__ = [
    "VARIANTS",
    "DivergenceError",
    "FederationResult",
    "RecallReport",
    "apply_variant",
    "evaluate_global",
    "indecisive_recall",
    "initial_model",
    "low_confidence_rates",
    "pseudo_label_accuracy",
    "run_federation",
    "run_round",
    "variant_overrides",
]
