"""
Client: confidence triage, category sets, prior statistics, proxy pool and local training.
"""

from .categories import (
    CategoryBatch,
    CategorySet,
    PriorStats,
    TriageResult,
    build_category_set,
    collect_prior_stats,
    indecisive_membership,
    one_hot_membership,
    triage_confidence,
    uniform_prior,
    verdicts_from_probs,
)
from .pool import ProxyPool, build_proxy_pool
from .training import (
    ClientRoundStats,
    ClientUpdate,
    LocalTrainConfig,
    PreparedBatch,
    batch_objective,
    local_train,
    prepare_batch,
)

__all__ = [
    "CategoryBatch",
    "CategorySet",
    "ClientRoundStats",
    "ClientUpdate",
    "LocalTrainConfig",
    "PreparedBatch",
    "PriorStats",
    "ProxyPool",
    "TriageResult",
    "batch_objective",
    "build_category_set",
    "build_proxy_pool",
    "collect_prior_stats",
    "indecisive_membership",
    "local_train",
    "one_hot_membership",
    "prepare_batch",
    "triage_confidence",
    "uniform_prior",
    "verdicts_from_probs",
]
