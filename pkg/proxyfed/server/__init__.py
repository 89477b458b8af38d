"""
Server: client sampling, aggregation, global proxy tuning and cost accounting.
"""

from .aggregation import aggregate_params, aggregate_prior, aggregation_weights, sample_clients
from .costs import comm_cost, gpt_flops_estimate
from .state import GlobalState
from .tuning import TuningResult, tune_global_proxies

__all__ = [
    "GlobalState",
    "TuningResult",
    "aggregate_params",
    "aggregate_prior",
    "aggregation_weights",
    "comm_cost",
    "gpt_flops_estimate",
    "sample_clients",
    "tune_global_proxies",
]
