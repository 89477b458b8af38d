"""
Global proxy tuning.

Starting from the size-weighted average of the uploaded proxy matrices, the
server runs full-batch gradient descent on the GPT loss so each global proxy
is pulled towards its class's client proxies and pushed from the others.
"""

import logging
from dataclasses import dataclass

import numpy as np

from proxyfed.config import GptConfig
from proxyfed.losses import loss_gpt

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TuningResult:
    """
    Outcome of global proxy tuning.

    Attributes:
        proxies: Tuned Omega_G, shape (C, d).
        trace: L_GPT at the start and after every accepted step.
        learning_rate: Step size in effect at the end (after any halvings).
        exhausted: True if a step could not decrease the loss within the halving budget.
    """

    proxies: np.ndarray
    trace: list[float]
    learning_rate: float
    exhausted: bool = False

    @property
    def final_loss(self) -> float:
        return self.trace[-1]


def tune_global_proxies(
    init: np.ndarray,
    client_proxies: list[np.ndarray] | np.ndarray,
    cfg: GptConfig,
) -> TuningResult:
    """
    Run Q steps of gradient descent on L_GPT.

    A step that would increase the loss is retried with half the learning
    rate; after `cfg.max_halvings` failed retries tuning stops and returns the
    last accepted proxies.

    Args:
        init: Averaged proxies, shape (C, d).
        client_proxies: The sampled clients' proxy matrices (constants).
        cfg: Learning rate, epochs Q, distance metric and halving budget.

    Returns:
        TuningResult whose trace is non-increasing.
    """
    proxies = np.array(init, dtype=np.float64, copy=True)
    client_proxies = np.asarray(client_proxies, dtype=np.float64)
    value, grad = loss_gpt(proxies, client_proxies, cfg.metric)
    trace = [value]
    lr = cfg.learning_rate
    exhausted = False

    for step in range(cfg.epochs):
        halvings = 0
        while True:
            candidate = proxies - lr * grad
            cand_value, cand_grad = loss_gpt(candidate, client_proxies, cfg.metric)
            if cand_value <= value:
                break
            if halvings >= cfg.max_halvings:
                exhausted = True
                break
            lr /= 2
            halvings += 1

        if exhausted:
            logger.warning(
                f"Global proxy tuning stopped at step {step}: loss still increasing after "
                f"{cfg.max_halvings} halvings (L_GPT={value:.6g})"
            )
            break
        proxies, value, grad = candidate, cand_value, cand_grad
        trace.append(value)

    return TuningResult(proxies=proxies, trace=trace, learning_rate=lr, exhausted=exhausted)
