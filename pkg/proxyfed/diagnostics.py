"""
Finite-difference suite over the four training losses.

Each entry of LOSS_CHECKS builds a random instance (loss function and the
point to check at) from a generator; `run_gradcheck_suite` checks every
loss on `instances` seeds and reports the worst relative error per loss.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from proxyfed.client.categories import CategoryBatch
from proxyfed.client.pool import build_proxy_pool
from proxyfed.losses import loss_gpt, loss_icpl, loss_supervised, loss_unsupervised
from proxyfed.model.core import GradientBuffer, ModelParams, init_params, softmax
from proxyfed.model.gradcheck import grad_check
from proxyfed.utils import DistanceMetric, SampleKind

logger = logging.getLogger(__name__)

LossFn = Callable[[ModelParams | np.ndarray], tuple[float, GradientBuffer | np.ndarray]]
InstanceBuilder = Callable[[np.random.Generator], tuple[LossFn, ModelParams | np.ndarray]]

# Small shapes keep one instance at a few hundred loss evaluations
INPUT_DIM = 4
HIDDEN_DIMS = (5,)
FEATURE_DIM = 3
NUM_CLASSES = 4
BATCH_SIZE = 8


def _random_params(rng: np.random.Generator) -> ModelParams:
    params = init_params(INPUT_DIM, HIDDEN_DIMS, FEATURE_DIM, NUM_CLASSES, rng)
    # non-zero biases so their gradients are exercised
    return params.unflatten(params.flatten() + rng.normal(0.0, 0.1, params.num_parameters))


def _supervised_instance(rng: np.random.Generator) -> tuple[LossFn, ModelParams]:
    x = rng.normal(size=(BATCH_SIZE, INPUT_DIM))
    y = rng.integers(NUM_CLASSES, size=BATCH_SIZE)
    return (lambda p: loss_supervised(p, x, y)), _random_params(rng)


def _unsupervised_instance(rng: np.random.Generator) -> tuple[LossFn, ModelParams]:
    x = rng.normal(size=(BATCH_SIZE, INPUT_DIM))
    pseudo = rng.integers(NUM_CLASSES, size=BATCH_SIZE)
    return (lambda p: loss_unsupervised(p, x, pseudo)), _random_params(rng)


def _icpl_instance(rng: np.random.Generator) -> tuple[LossFn, ModelParams]:
    params = _random_params(rng)
    x = rng.normal(size=(BATCH_SIZE, INPUT_DIM))
    kinds = np.array(
        [SampleKind.LABELED, SampleKind.LABELED, SampleKind.HIGH_CONF, SampleKind.HIGH_CONF]
        + [SampleKind.LOW_CONF] * (BATCH_SIZE - 4),
        dtype=np.int64,
    )
    membership = np.zeros((BATCH_SIZE, NUM_CLASSES), dtype=bool)
    for row, kind in enumerate(kinds):
        size = 1 if kind != SampleKind.LOW_CONF else int(rng.integers(1, 3))
        membership[row, rng.choice(NUM_CLASSES, size=size, replace=False)] = True
    local_probs = softmax(rng.normal(size=(BATCH_SIZE, NUM_CLASSES)))
    pool = build_proxy_pool(params, CategoryBatch(kinds=kinds, membership=membership), local_probs)
    return (lambda p: loss_icpl(p, pool, x)), params


def _gpt_instance(rng: np.random.Generator) -> tuple[LossFn, np.ndarray]:
    metric = DistanceMetric.COSINE if rng.random() < 0.5 else DistanceMetric.SQUARED_EUCLIDEAN
    clients = rng.normal(size=(3, NUM_CLASSES, FEATURE_DIM))
    start = clients.mean(axis=0) + rng.normal(0.0, 0.1, size=(NUM_CLASSES, FEATURE_DIM))
    return (lambda g: loss_gpt(g, clients, metric)), start


LOSS_CHECKS: dict[str, InstanceBuilder] = {
    "supervised": _supervised_instance,
    "unsupervised": _unsupervised_instance,
    "icpl": _icpl_instance,
    "gpt": _gpt_instance,
}


@dataclass
class LossCheckResult:
    """Worst case of one loss over all instances."""

    name: str
    max_relative_error: float = 0.0
    worst_seed: int | None = None
    failing_seeds: list[int] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failing_seeds


@dataclass
class GradCheckSuiteReport:
    results: list[LossCheckResult]
    tolerance: float
    instances: int

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)


def run_gradcheck_suite(
    seed: int = 0, instances: int = 10, tolerance: float = 1e-5
) -> GradCheckSuiteReport:
    """
    Check every registered loss on `instances` random instances.

    Instance i of every loss is drawn from seed + i.
    """
    results = []
    for name, build in LOSS_CHECKS.items():
        result = LossCheckResult(name=name)
        for i in range(instances):
            instance_seed = seed + i
            loss_fn, point = build(np.random.default_rng(instance_seed))
            report = grad_check(loss_fn, point, tolerance=tolerance)
            if report.max_relative_error >= result.max_relative_error:
                result.max_relative_error = report.max_relative_error
                result.worst_seed = instance_seed
            if not report.passed:
                result.failing_seeds.append(instance_seed)
                logger.error(
                    f"Gradient check failed for {name} at seed {instance_seed}: "
                    f"relative error {report.max_relative_error:.3e}"
                )
        results.append(result)
    return GradCheckSuiteReport(results=results, tolerance=tolerance, instances=instances)
