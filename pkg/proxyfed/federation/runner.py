"""
Round orchestration.

Each round: sample clients, broadcast the global state, train the sampled
clients in parallel, aggregate their parameters, tune the global proxies,
aggregate the prior, evaluate and record metrics.

Runs are deterministic in `master_seed`: every client draws from its own
stream keyed by (seed, round, client id) and results are merged in
ascending client-id order, so the worker count never changes the output.
"""

import concurrent.futures
import logging
import time
from dataclasses import dataclass

import numpy as np

from proxyfed.client.training import (
    ClientRoundStats,
    ClientUpdate,
    LocalTrainConfig,
    local_train,
)
from proxyfed.config import FederationConfig, settings
from proxyfed.datagen import ClientDataset, SampleSet, generate_blobs, partition_dirichlet
from proxyfed.federation.evaluation import (
    evaluate_global,
    low_confidence_rates,
    pseudo_label_accuracy,
)
from proxyfed.metrics import RoundMetrics
from proxyfed.model.core import ModelParams, ShapeError, init_params
from proxyfed.server.aggregation import aggregate_params, aggregate_prior, sample_clients
from proxyfed.server.costs import comm_cost
from proxyfed.server.state import GlobalState
from proxyfed.server.tuning import tune_global_proxies
from proxyfed.utils import RngStream, derive_rng

logger = logging.getLogger(__name__)


class DivergenceError(Exception):
    """Raised when a round produces non-finite parameters or losses."""

    pass


@dataclass
class FederationResult:
    """Final global state, per-round metrics and the data the run used."""

    state: GlobalState
    metrics: list[RoundMetrics]
    clients: list[ClientDataset]
    test: SampleSet


def initial_model(cfg: FederationConfig) -> ModelParams:
    """The shared random initialization broadcast at round 0."""
    return init_params(
        input_dim=cfg.input_dim,
        hidden_dims=(cfg.hidden_dim,),
        feature_dim=cfg.feature_dim,
        num_classes=cfg.num_classes,
        rng=derive_rng(cfg.master_seed, RngStream.INIT),
    )


def _check_initial(params: ModelParams, cfg: FederationConfig) -> None:
    if params.input_dim != cfg.input_dim or params.num_classes != cfg.num_classes:
        raise ShapeError(
            f"Initial parameters are ({params.input_dim} inputs, {params.num_classes} classes) "
            f"but the config asks for ({cfg.input_dim}, {cfg.num_classes})"
        )


def _train_client(
    state: GlobalState,
    client: ClientDataset,
    local_cfg: LocalTrainConfig,
    master_seed: int,
    round_index: int,
) -> ClientUpdate:
    rng = derive_rng(master_seed, RngStream.CLIENT, round_index, client.client_id)
    return local_train(state.params, client, state.prior, local_cfg, rng)


def _check_finite(
    round_number: int,
    params: ModelParams,
    prior: np.ndarray,
    stats: list[ClientRoundStats],
    loss_gpt: float,
) -> None:
    """
    Raise DivergenceError if the round left anything non-finite.

    Raises:
        DivergenceError: Naming what went non-finite in which round.
    """
    losses = {
        "loss_s": [s.loss_s for s in stats],
        "loss_u": [s.loss_u for s in stats],
        "loss_icpl": [s.loss_icpl for s in stats],
        "loss_gpt": [loss_gpt],
    }
    broken = [name for name, values in losses.items() if not np.all(np.isfinite(values))]
    if not np.all(np.isfinite(params.flatten())):
        broken.append("params")
    if not np.all(np.isfinite(prior)):
        broken.append("prior")
    if broken:
        message = f"Round {round_number}: non-finite {', '.join(broken)}"
        logger.error(message)
        raise DivergenceError(message)


def run_round(
    state: GlobalState,
    cfg: FederationConfig,
    clients: list[ClientDataset],
    test: SampleSet,
    executor: concurrent.futures.Executor,
    local_cfg: LocalTrainConfig | None = None,
) -> tuple[GlobalState, RoundMetrics]:
    """
    Run one round from `state` and return the next state with its metrics.

    Args:
        state: Global state broadcast this round (state.round is the 0-based index).
        cfg: Run configuration.
        clients: All K client datasets.
        test: Held-out test set.
        executor: Pool the sampled clients are trained on.
        local_cfg: Local training configuration (derived from cfg if omitted).
    """
    started = time.perf_counter()
    round_index = state.round
    local_cfg = local_cfg or LocalTrainConfig.from_federation(cfg)

    selected = sample_clients(cfg.num_clients, cfg.clients_per_round, round_index, cfg.master_seed)
    futures = [
        executor.submit(
            _train_client, state, clients[cid], local_cfg, cfg.master_seed, round_index
        )
        for cid in selected
    ]
    # selected is sorted, so this is ascending client-id order
    updates = [future.result() for future in futures]

    averaged = aggregate_params(
        [u.params for u in updates], [u.stats.num_samples for u in updates]
    )
    tuning = tune_global_proxies(
        averaged.proxies, [u.params.proxies for u in updates], cfg.gpt
    )
    params = averaged.with_proxies(tuning.proxies)
    prior = aggregate_prior([u.prior_stats for u in updates])
    stats = [u.stats for u in updates]
    _check_finite(round_index + 1, params, prior, stats, tuning.final_loss)
    next_state = GlobalState(params=params, prior=prior, round=round_index + 1)

    lc_recall, lc_top1 = low_confidence_rates(stats)
    metrics = RoundMetrics(
        round=round_index + 1,
        test_accuracy=evaluate_global(next_state, test),
        pseudo_label_accuracy=pseudo_label_accuracy(stats),
        excluded_count=sum(s.excluded_count for s in stats),
        unlabeled_seen=sum(s.unlabeled_seen for s in stats),
        loss_s=float(np.mean([s.loss_s for s in stats])),
        loss_u=float(np.mean([s.loss_u for s in stats])),
        loss_icpl=float(np.mean([s.loss_icpl for s in stats])),
        loss_gpt=tuning.final_loss,
        comm_cost=comm_cost(params.num_parameters, params.num_classes, len(selected)),
        wall_time=time.perf_counter() - started,
        lc_recall=lc_recall,
        lc_top1_accuracy=lc_top1,
        gpt_exhausted=tuning.exhausted,
    )
    logger.debug(f"Round {metrics.round}: clients {selected}")
    return next_state, metrics


def run_federation(
    cfg: FederationConfig,
    initial_params: ModelParams | None = None,
    threads: int | None = None,
) -> FederationResult:
    """
    Run T rounds of federated semi-supervised training.

    Args:
        cfg: Validated run configuration.
        initial_params: Round-0 model; a seeded random init if omitted.
        threads: Client worker count; defaults to the PROXYFED_THREADS setting.

    Returns:
        FederationResult with the final state and exactly T metrics rows.

    Raises:
        ShapeError: If initial_params do not fit the configured data.
        DivergenceError: If a round leaves non-finite parameters or losses.
    """
    train, test = generate_blobs(cfg.dataset_spec)
    clients = partition_dirichlet(
        train,
        num_clients=cfg.num_clients,
        dirichlet_alpha=cfg.dirichlet_alpha,
        seed=cfg.master_seed,
        max_resample_attempts=cfg.max_resample_attempts,
    )

    params = initial_params if initial_params is not None else initial_model(cfg)
    _check_initial(params, cfg)
    state = GlobalState.initial(params)
    local_cfg = LocalTrainConfig.from_federation(cfg)
    workers = max(1, min(threads or settings().threads, cfg.clients_per_round))

    logger.info(
        f"Starting federation: K={cfg.num_clients}, M={cfg.clients_per_round}, "
        f"T={cfg.rounds}, seed={cfg.master_seed}, workers={workers}"
    )

    metrics: list[RoundMetrics] = []
    with concurrent.futures.ThreadPoolExecutor(
        max_workers=workers, thread_name_prefix="proxyfed-client"
    ) as executor:
        for _ in range(cfg.rounds):
            state, row = run_round(state, cfg, clients, test, executor, local_cfg)
            metrics.append(row)
            logger.info(
                f"Round {row.round}/{cfg.rounds}: accuracy={row.test_accuracy:.4f}, "
                f"excluded={row.excluded_count}, comm_cost={row.comm_cost}"
            )

    return FederationResult(state=state, metrics=metrics, clients=clients, test=test)
