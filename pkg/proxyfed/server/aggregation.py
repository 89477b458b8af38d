"""
Client sampling and aggregation of uploaded parameters and prior statistics.
"""

import numpy as np

from proxyfed.client.categories import PriorStats
from proxyfed.model.core import DenseLayer, ModelParams, ShapeError
from proxyfed.utils import RngStream, derive_rng


def sample_clients(
    num_clients: int, clients_per_round: int, round_index: int, master_seed: int
) -> list[int]:
    """
    Pick the round's clients uniformly without replacement.

    Returns:
        Sorted list of distinct client ids, deterministic in (master_seed, round_index).

    Raises:
        ValueError: If clients_per_round is not in [1, num_clients].
    """
    if not 1 <= clients_per_round <= num_clients:
        raise ValueError(
            f"clients_per_round must be in [1, {num_clients}], got {clients_per_round}"
        )
    rng = derive_rng(master_seed, RngStream.SAMPLING, round_index)
    chosen = rng.choice(num_clients, size=clients_per_round, replace=False)
    return sorted(int(c) for c in chosen)


def aggregation_weights(sizes: list[int] | np.ndarray) -> np.ndarray:
    """gamma_m = N_m / sum(N)."""
    sizes = np.asarray(sizes, dtype=np.float64)
    if sizes.ndim != 1 or len(sizes) == 0:
        raise ValueError("Need at least one client size")
    if np.any(sizes < 0) or sizes.sum() <= 0:
        raise ValueError(f"Client sizes must be non-negative with a positive total, got {sizes}")
    return sizes / sizes.sum()


def aggregate_params(
    client_params: list[ModelParams], sizes: list[int] | np.ndarray
) -> ModelParams:
    """
    Size-weighted mean of client parameters, proxies included.

    The returned proxies are the averaged Omega that global proxy tuning
    starts from.

    Raises:
        ShapeError: If the architectures differ or sizes do not match the list.
    """
    if len(client_params) != len(sizes):
        raise ShapeError(f"{len(client_params)} parameter sets but {len(sizes)} sizes")
    gamma = aggregation_weights(sizes)
    reference = client_params[0]
    shapes = [(layer.weight.shape, layer.bias.shape) for layer in reference.layers]
    for params in client_params[1:]:
        other = [(layer.weight.shape, layer.bias.shape) for layer in params.layers]
        if other != shapes or params.proxies.shape != reference.proxies.shape:
            raise ShapeError("Client parameters do not share an architecture")

    layers = []
    for i in range(len(reference.layers)):
        weight = sum(g * p.layers[i].weight for g, p in zip(gamma, client_params))
        bias = sum(g * p.layers[i].bias for g, p in zip(gamma, client_params))
        layers.append(DenseLayer(weight=weight, bias=bias))
    proxies = sum(g * p.proxies for g, p in zip(gamma, client_params))
    return ModelParams(layers=tuple(layers), proxies=proxies)


def aggregate_prior(stats: list[PriorStats]) -> np.ndarray:
    """Unweighted mean of the clients' normalized priors; always a simplex vector."""
    if not stats:
        raise ValueError("Need at least one client's prior statistics")
    prior = np.mean([s.normalized() for s in stats], axis=0)
    return prior / prior.sum()
