"""
Client-side local training.

One call to `local_train` is one sampled client's round: E epochs of
mini-batch SGD on

    L_local = L_s + alpha * L_u + beta * L_ICPL

starting from the broadcast global parameters, plus the prior statistics
and per-client counters the server and metrics need. With the step guard
on, a step that would raise L_local on its own batch is retried at half
the learning rate.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from proxyfed.client.categories import (
    CategoryBatch,
    PriorStats,
    collect_prior_stats,
    indecisive_membership,
    one_hot_membership,
    triage_confidence,
)
from proxyfed.client.pool import ProxyPool, build_proxy_pool
from proxyfed.config import AugmentConfig, FederationConfig, LossWeights
from proxyfed.datagen import ClientDataset, augment_strong, augment_weak
from proxyfed.losses import loss_icpl, loss_supervised, loss_unsupervised, local_objective
from proxyfed.model.core import GradientBuffer, ModelParams, predict, sgd_step
from proxyfed.utils import LowConfMode, PseudoLabelSource, SampleKind, XiRule

logger = logging.getLogger(__name__)


class LocalTrainConfig(BaseModel):
    """Hyper-parameters of one client's local update."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    epochs: int = Field(default=5, ge=0)
    batch_size: int = Field(default=32, ge=1)
    learning_rate: float = Field(default=0.1, gt=0)
    confidence_threshold: float = Field(default=0.95, gt=0, lt=1)
    loss_weights: LossWeights = LossWeights()
    augment: AugmentConfig = AugmentConfig()
    low_conf_mode: LowConfMode = LowConfMode.ICPL
    xi_rule: XiRule = XiRule.PRIOR
    pseudo_label_source: PseudoLabelSource = PseudoLabelSource.GLOBAL
    use_unlabeled: bool = True
    max_halvings: int = Field(default=20, ge=0)
    step_guard: bool = True

    @classmethod
    def from_federation(cls, cfg: FederationConfig) -> "LocalTrainConfig":
        return cls(
            epochs=cfg.local_epochs,
            batch_size=cfg.batch_size,
            learning_rate=cfg.local_lr,
            confidence_threshold=cfg.confidence_threshold,
            loss_weights=cfg.loss_weights,
            augment=cfg.augment,
            low_conf_mode=cfg.low_conf_mode,
            xi_rule=cfg.xi_rule,
            pseudo_label_source=cfg.pseudo_label_source,
            use_unlabeled=cfg.use_unlabeled,
            step_guard=cfg.local_step_guard,
        )


@dataclass
class ClientRoundStats:
    """
    Counters from one client's local update.

    Triage counters (hc_*, lc_*) use the genuine threshold verdicts, whatever
    the low-confidence mode does with them afterwards.
    """

    client_id: int
    num_samples: int
    loss_s: float = 0.0
    loss_u: float = 0.0
    loss_icpl: float = 0.0
    excluded_count: int = 0
    unlabeled_seen: int = 0
    hc_count: int = 0
    hc_correct: int = 0
    lc_count: int = 0
    lc_in_xi: int = 0
    lc_top1_correct: int = 0
    lr_halvings: int = 0
    skipped_steps: int = 0
    descent_trace: list[float] = field(default_factory=list)
    final_learning_rate: float | None = None
    descent_exhausted: bool = False


@dataclass
class ClientUpdate:
    """What a client uploads (params, prior statistics) plus its local stats."""

    params: ModelParams
    prior_stats: PriorStats
    stats: ClientRoundStats


@dataclass
class PreparedBatch:
    """
    Everything the local objective needs for one batch, fixed before the step.

    Attributes:
        labeled_x / labeled_y: Raw labeled inputs and their labels.
        strong_x / strong_targets: Strong views and pseudo-labels for L_u.
        icpl_inputs: Rows the pool indexes (labeled, then kept unlabeled, all weak views).
        pool: Proxy pool, or None when L_ICPL is off.
    """

    labeled_x: np.ndarray
    labeled_y: np.ndarray
    strong_x: np.ndarray
    strong_targets: np.ndarray
    icpl_inputs: np.ndarray
    pool: ProxyPool | None
    excluded: int = 0
    unlabeled_seen: int = 0
    hc_labels: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    hc_count: int = 0
    hc_correct: int = 0
    lc_count: int = 0
    lc_in_xi: int = 0
    lc_top1_correct: int = 0


# =============================================================================
# Batch Preparation
# =============================================================================


def prepare_batch(
    params: ModelParams,
    global_params: ModelParams,
    client: ClientDataset,
    labeled_rows: np.ndarray,
    unlabeled_rows: np.ndarray,
    prior: np.ndarray,
    cfg: LocalTrainConfig,
    rng: np.random.Generator,
) -> PreparedBatch:
    """
    Triage a batch and fix the targets, category sets and proxy pool.

    Args:
        params: Current local parameters (pool positives, local probabilities).
        global_params: Broadcast parameters (triage under the global source).
        client: The client's data.
        labeled_rows: Rows of client.labeled in this batch.
        unlabeled_rows: Rows of client.unlabeled in this batch.
        prior: Global prior broadcast at round start.
        cfg: Local training configuration.
        rng: Client stream for augmentation draws.
    """
    num_classes = params.num_classes
    labeled_x = client.labeled.features[labeled_rows]
    labeled_y = client.labeled.labels[labeled_rows]

    if not cfg.use_unlabeled:
        return PreparedBatch(
            labeled_x=labeled_x,
            labeled_y=labeled_y,
            strong_x=np.zeros((0, params.input_dim)),
            strong_targets=np.zeros(0, dtype=np.int64),
            icpl_inputs=labeled_x,
            pool=None,
            excluded=len(unlabeled_rows),
            unlabeled_seen=len(unlabeled_rows),
        )

    raw_u = client.unlabeled.features[unlabeled_rows]
    truth_u = client.unlabeled.labels[unlabeled_rows]
    triage_model = global_params if cfg.pseudo_label_source == PseudoLabelSource.GLOBAL else params
    triage = triage_confidence(
        triage_model, raw_u, cfg.confidence_threshold, cfg.augment, rng
    )
    high = triage.high_confidence
    low = ~high
    pseudo = triage.pseudo_labels
    xi = indecisive_membership(triage.probs, prior, cfg.xi_rule) if len(raw_u) else (
        np.zeros((0, num_classes), dtype=bool)
    )

    mode = cfg.low_conf_mode
    # rows of the unlabeled batch entering L_u and the pool as high-confidence
    treated_high = np.ones_like(high) if mode == LowConfMode.DIRECT else high
    kept = treated_high if mode == LowConfMode.DISCARD else np.ones_like(high)

    strong_x = augment_strong(raw_u[treated_high], cfg.augment, rng)
    strong_targets = pseudo[treated_high]

    kinds_u = np.where(treated_high, SampleKind.HIGH_CONF, SampleKind.LOW_CONF)[kept]
    membership_u = np.where(
        treated_high[:, None], one_hot_membership(pseudo, num_classes), xi
    )[kept]
    icpl_inputs = np.concatenate([labeled_x, triage.weak_inputs[kept]], axis=0)

    pool = None
    if cfg.loss_weights.beta > 0:
        # labeled rows join the pool as weak views too, drawn after the strong views
        labeled_weak = augment_weak(labeled_x, cfg.augment, rng)
        icpl_inputs = np.concatenate([labeled_weak, triage.weak_inputs[kept]], axis=0)
        categories = CategoryBatch(
            kinds=np.concatenate(
                [np.full(len(labeled_y), SampleKind.LABELED, dtype=np.int64), kinds_u]
            ),
            membership=np.concatenate(
                [one_hot_membership(labeled_y, num_classes), membership_u], axis=0
            ),
        )
        local_probs = (
            predict(params, icpl_inputs) if len(icpl_inputs) else np.zeros((0, num_classes))
        )
        pool = build_proxy_pool(params, categories, local_probs)

    if mode == LowConfMode.DISCARD:
        excluded = int(low.sum())
    elif mode == LowConfMode.DIRECT:
        excluded = 0
    elif pool is None:
        excluded = int(low.sum())
    else:
        excluded = pool.dropped_low_conf

    return PreparedBatch(
        labeled_x=labeled_x,
        labeled_y=labeled_y,
        strong_x=strong_x,
        strong_targets=strong_targets,
        icpl_inputs=icpl_inputs,
        pool=pool,
        excluded=excluded,
        unlabeled_seen=len(raw_u),
        hc_labels=pseudo[high],
        hc_count=int(high.sum()),
        hc_correct=int((pseudo[high] == truth_u[high]).sum()),
        lc_count=int(low.sum()),
        lc_in_xi=int(xi[low, truth_u[low]].sum()) if low.any() else 0,
        lc_top1_correct=int((pseudo[low] == truth_u[low]).sum()),
    )


def batch_objective(
    params: ModelParams, batch: PreparedBatch, weights: LossWeights
) -> tuple[float, GradientBuffer, tuple[float, float, float]]:
    """
    L_local and its gradient on a prepared batch.

    Returns:
        Tuple of (value, gradient, (L_s, L_u, L_ICPL)).
    """
    grads = GradientBuffer.zeros_like(params)
    loss_s = loss_u = loss_c = 0.0
    if len(batch.labeled_y):
        loss_s, g = loss_supervised(params, batch.labeled_x, batch.labeled_y)
        grads = grads + g
    if len(batch.strong_targets):
        loss_u, g = loss_unsupervised(params, batch.strong_x, batch.strong_targets)
        grads = grads + g.scale(weights.alpha)
    if batch.pool is not None and batch.pool.num_anchors:
        loss_c, g = loss_icpl(params, batch.pool, batch.icpl_inputs)
        grads = grads + g.scale(weights.beta)
    value = local_objective(loss_s, loss_u, loss_c, weights)
    return value, grads, (loss_s, loss_u, loss_c)


# =============================================================================
# Local Update
# =============================================================================


def _batches(
    num_labeled: int, num_unlabeled: int, batch_size: int, rng: np.random.Generator
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Shuffle both streams and split them into the same number of batches."""
    num_batches = max(1, math.ceil((num_labeled + num_unlabeled) / batch_size))
    labeled = np.array_split(rng.permutation(num_labeled), num_batches)
    unlabeled = np.array_split(rng.permutation(num_unlabeled), num_batches)
    return [(lab, unl) for lab, unl in zip(labeled, unlabeled) if len(lab) or len(unl)]


def _accumulate(stats: ClientRoundStats, batch: PreparedBatch) -> None:
    stats.excluded_count += batch.excluded
    stats.unlabeled_seen += batch.unlabeled_seen
    stats.hc_count += batch.hc_count
    stats.hc_correct += batch.hc_correct
    stats.lc_count += batch.lc_count
    stats.lc_in_xi += batch.lc_in_xi
    stats.lc_top1_correct += batch.lc_top1_correct


def local_train(
    global_params: ModelParams,
    client: ClientDataset,
    prior: np.ndarray,
    cfg: LocalTrainConfig,
    rng: np.random.Generator,
    descent_check: bool = False,
) -> ClientUpdate:
    """
    Run one client's local update from the broadcast model.

    Args:
        global_params: Broadcast Theta_G (extractor and global proxies).
        client: The client's labeled and unlabeled samples.
        prior: Global prior P'_G broadcast at round start.
        cfg: Local training configuration.
        rng: The client's stream for this round.
        descent_check: Train on one fixed full batch, halving the learning
            rate whenever a step would increase L_local.

    Returns:
        ClientUpdate with the trained params, prior statistics and stats.
    """
    stats = ClientRoundStats(client_id=client.client_id, num_samples=client.size)
    num_classes = global_params.num_classes
    if cfg.epochs == 0:
        return ClientUpdate(
            params=global_params, prior_stats=PriorStats.empty(num_classes), stats=stats
        )

    if descent_check:
        return _descent_train(global_params, client, prior, cfg, rng, stats)

    params = global_params
    num_unlabeled = client.num_unlabeled
    prior_stats = PriorStats.empty(num_classes)
    totals = np.zeros(3)
    steps = 0

    for _ in range(cfg.epochs):
        if cfg.use_unlabeled:
            batches = _batches(client.num_labeled, num_unlabeled, cfg.batch_size, rng)
        else:
            batches = _batches(client.num_labeled, 0, cfg.batch_size, rng)
            stats.excluded_count += num_unlabeled
            stats.unlabeled_seen += num_unlabeled

        for labeled_rows, unlabeled_rows in batches:
            batch = prepare_batch(
                params, global_params, client, labeled_rows, unlabeled_rows, prior, cfg, rng
            )
            value, grads, parts = batch_objective(params, batch, cfg.loss_weights)
            if cfg.step_guard:
                params, halvings, accepted = _guarded_step(params, batch, value, grads, cfg)
                stats.lr_halvings += halvings
                stats.skipped_steps += int(not accepted)
            else:
                params = sgd_step(params, grads, cfg.learning_rate)
            _accumulate(stats, batch)
            prior_stats = prior_stats + collect_prior_stats(
                batch.labeled_y, batch.hc_labels, num_classes
            )
            totals += parts
            steps += 1

    if steps:
        stats.loss_s, stats.loss_u, stats.loss_icpl = (float(v) for v in totals / steps)
    stats.final_learning_rate = cfg.learning_rate
    if stats.skipped_steps:
        logger.warning(
            f"Client {client.client_id}: skipped {stats.skipped_steps} of {steps} steps "
            f"whose loss kept rising after {cfg.max_halvings} halvings"
        )
    logger.debug(
        f"Client {client.client_id}: {steps} steps, L_s={stats.loss_s:.4f} "
        f"L_u={stats.loss_u:.4f} L_icpl={stats.loss_icpl:.4f} excluded={stats.excluded_count} "
        f"halvings={stats.lr_halvings} skipped={stats.skipped_steps}"
    )
    return ClientUpdate(params=params, prior_stats=prior_stats, stats=stats)


def _guarded_step(
    params: ModelParams,
    batch: PreparedBatch,
    value: float,
    grads: GradientBuffer,
    cfg: LocalTrainConfig,
) -> tuple[ModelParams, int, bool]:
    """
    One SGD step that never raises L_local on its own batch.

    The learning rate starts at cfg.learning_rate and halves until the step
    keeps the batch objective finite and no larger; after cfg.max_halvings
    failed halvings the step is skipped.

    Returns:
        Tuple of (params, halvings used, whether a step was taken).
    """
    if not np.isfinite(value) or not np.all(np.isfinite(grads.flatten())):
        return params, 0, False
    lr = cfg.learning_rate
    for halvings in range(cfg.max_halvings + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            candidate = sgd_step(params, grads, lr)
            cand_value, _, _ = batch_objective(candidate, batch, cfg.loss_weights)
        if np.isfinite(cand_value) and cand_value <= value:
            return candidate, halvings, True
        lr /= 2
    return params, cfg.max_halvings, False


def _descent_train(
    global_params: ModelParams,
    client: ClientDataset,
    prior: np.ndarray,
    cfg: LocalTrainConfig,
    rng: np.random.Generator,
    stats: ClientRoundStats,
) -> ClientUpdate:
    """E full-batch steps on one fixed objective with halve-on-increase."""
    num_unlabeled = client.num_unlabeled if cfg.use_unlabeled else 0
    batch = prepare_batch(
        global_params,
        global_params,
        client,
        np.arange(client.num_labeled),
        np.arange(client.num_unlabeled if cfg.use_unlabeled else 0),
        prior,
        cfg,
        rng,
    )
    if not cfg.use_unlabeled:
        batch.excluded = batch.unlabeled_seen = client.num_unlabeled
    _accumulate(stats, batch)
    prior_stats = collect_prior_stats(batch.labeled_y, batch.hc_labels, global_params.num_classes)

    params = global_params
    lr = cfg.learning_rate
    value, grads, parts = batch_objective(params, batch, cfg.loss_weights)
    stats.descent_trace.append(value)

    for step in range(cfg.epochs):
        halvings = 0
        while True:
            candidate = sgd_step(params, grads, lr)
            cand_value, cand_grads, cand_parts = batch_objective(
                candidate, batch, cfg.loss_weights
            )
            if cand_value <= value:
                break
            if halvings >= cfg.max_halvings:
                stats.descent_exhausted = True
                break
            lr /= 2
            halvings += 1

        if stats.descent_exhausted:
            logger.warning(
                f"Client {client.client_id}: local loss still increasing after "
                f"{cfg.max_halvings} halvings at step {step}; stopping at L={value:.6g}"
            )
            break
        params, value, grads, parts = candidate, cand_value, cand_grads, cand_parts
        stats.descent_trace.append(value)

    stats.loss_s, stats.loss_u, stats.loss_icpl = parts
    stats.final_learning_rate = lr
    logger.debug(
        f"Client {client.client_id}: descent check over {num_unlabeled} unlabeled rows, "
        f"final L={value:.6g}, lr={lr:.3g}"
    )
    return ClientUpdate(params=params, prior_stats=prior_stats, stats=stats)
