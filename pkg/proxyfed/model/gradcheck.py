"""
Finite-difference gradient verification.

Compares analytic gradients against central differences over every
parameter of a ModelParams value or a bare array.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from proxyfed.model.core import GradientBuffer, ModelParams

logger = logging.getLogger(__name__)

# Entries smaller than this are compared absolutely.
RELATIVE_ERROR_FLOOR = 1e-2


@dataclass(frozen=True)
class GradCheckReport:
    """Outcome of one finite-difference comparison."""

    max_relative_error: float
    worst_index: int
    num_parameters: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.max_relative_error < self.tolerance)


def _flat(value: ModelParams | GradientBuffer | np.ndarray) -> np.ndarray:
    if isinstance(value, (ModelParams, GradientBuffer)):
        return value.flatten()
    return np.asarray(value, dtype=np.float64).ravel()


def _rebuild(params: ModelParams | np.ndarray, vector: np.ndarray) -> ModelParams | np.ndarray:
    if isinstance(params, ModelParams):
        return params.unflatten(vector)
    return vector.reshape(np.shape(params))


def grad_check(
    loss_fn: Callable[[ModelParams | np.ndarray], tuple[float, GradientBuffer | np.ndarray]],
    params: ModelParams | np.ndarray,
    tolerance: float = 1e-5,
    step: float = 1e-6,
) -> GradCheckReport:
    """
    Check an analytic gradient against central finite differences.

    Args:
        loss_fn: Pure function params -> (value, gradient).
        params: Point to check at; ModelParams or ndarray.
        tolerance: Pass threshold on the max element relative error.
        step: Central-difference step.

    Returns:
        GradCheckReport with the max relative error
        |a - n| / max(|a|, |n|, RELATIVE_ERROR_FLOOR).
    """
    _, analytic = loss_fn(params)
    analytic_flat = _flat(analytic)
    base = _flat(params).copy()

    numeric = np.zeros_like(base)
    for i in range(base.size):
        shifted = base.copy()
        shifted[i] = base[i] + step
        plus, _ = loss_fn(_rebuild(params, shifted))
        shifted[i] = base[i] - step
        minus, _ = loss_fn(_rebuild(params, shifted))
        numeric[i] = (plus - minus) / (2.0 * step)

    scale = np.maximum(np.maximum(np.abs(analytic_flat), np.abs(numeric)), RELATIVE_ERROR_FLOOR)
    errors = np.abs(analytic_flat - numeric) / scale
    worst = int(np.argmax(errors)) if errors.size else 0
    report = GradCheckReport(
        max_relative_error=float(errors.max()) if errors.size else 0.0,
        worst_index=worst,
        num_parameters=int(base.size),
        tolerance=tolerance,
    )
    logger.debug(
        f"Gradient check over {report.num_parameters} parameters: "
        f"max relative error {report.max_relative_error:.3e}"
    )
    return report
