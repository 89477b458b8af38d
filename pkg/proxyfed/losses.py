"""
Loss values and analytic gradients.

Provides:
- loss_supervised: cross-entropy on labeled samples (L_s)
- loss_unsupervised: cross-entropy against fixed pseudo-labels (L_u)
- loss_icpl: indecisive-categories proxy contrastive loss (L_ICPL)
- loss_gpt: server-side global proxy tuning loss (L_GPT)

Every model loss returns (value, GradientBuffer); loss_gpt returns the
gradient with respect to the global proxy matrix only.
"""

from typing import TYPE_CHECKING

import numpy as np

from proxyfed.config import LossWeights
from proxyfed.model.core import (
    GradientBuffer,
    ModelParams,
    ShapeError,
    backward,
    classify,
    forward_extract,
    log_softmax,
    logsumexp,
    softmax,
)
from proxyfed.utils import DistanceMetric, SampleKind

if TYPE_CHECKING:
    from proxyfed.client.pool import ProxyPool


class EmptyBatchError(Exception):
    """Raised when a loss that needs samples receives none."""

    pass


# =============================================================================
# Cross-Entropy Terms
# =============================================================================


def _cross_entropy(
    params: ModelParams, inputs: np.ndarray, targets: np.ndarray
) -> tuple[float, GradientBuffer]:
    trace = forward_extract(params, inputs)
    z = trace.features
    logits, probs = classify(params, z)
    n = z.shape[0]
    targets = np.asarray(targets, dtype=np.int64)
    if targets.shape != (n,):
        raise ShapeError(f"Expected {n} targets, got shape {targets.shape}")

    value = float(-log_softmax(logits)[np.arange(n), targets].mean())

    grad_logits = probs.copy()
    grad_logits[np.arange(n), targets] -= 1.0
    grad_logits /= n
    grad_z = grad_logits @ params.proxies
    grad_proxies = grad_logits.T @ z
    return value, backward(params, trace, grad_z, grad_proxies)


def loss_supervised(
    params: ModelParams, inputs: np.ndarray, labels: np.ndarray
) -> tuple[float, GradientBuffer]:
    """
    Mean cross-entropy on raw labeled inputs.

    Raises:
        EmptyBatchError: If the batch is empty; callers skip the term instead.
    """
    if len(labels) == 0:
        raise EmptyBatchError("Supervised loss needs at least one labeled sample")
    return _cross_entropy(params, inputs, labels)


def loss_unsupervised(
    params: ModelParams, strong_inputs: np.ndarray, pseudo_labels: np.ndarray
) -> tuple[float, GradientBuffer]:
    """
    Mean cross-entropy of strong-view predictions against one-hot pseudo-labels.

    Pseudo-labels are constants. An empty high-confidence set contributes 0.
    """
    if len(pseudo_labels) == 0:
        return 0.0, GradientBuffer.zeros_like(params)
    return _cross_entropy(params, strong_inputs, pseudo_labels)


# =============================================================================
# Indecisive-Categories Proxy Learning
# =============================================================================


def loss_icpl(
    params: ModelParams, pool: "ProxyPool", inputs: np.ndarray
) -> tuple[float, GradientBuffer]:
    """
    Contrastive loss between each anchor, its positive proxy and its negatives.

    For anchor i with feature z_i, positive proxy p_i = w_i @ Omega (w_i
    fixed) and negative features R_i:

        l_i = -log( e^{z_i.p_i} / (e^{z_i.p_i} + sum_{j in R_i} e^{z_i.z_j}) )

    The value is the mean of l_i over high-confidence anchors plus the mean
    over low-confidence anchors. Anchors without negatives are skipped; an
    empty group contributes 0.

    Args:
        params: Local model parameters.
        pool: Proxy pool built over the same batch rows.
        inputs: Batch inputs (n, D), row-aligned with the pool.

    Returns:
        Tuple of (value, GradientBuffer).
    """
    if pool.num_anchors == 0:
        return 0.0, GradientBuffer.zeros_like(params)

    trace = forward_extract(params, inputs)
    z = trace.features
    if z.shape[0] != pool.num_rows:
        raise ShapeError(f"Pool covers {pool.num_rows} rows but batch has {z.shape[0]}")

    anchors = z[pool.anchor_rows]
    positives = pool.positive_weights @ params.proxies
    mask = pool.negative_mask
    has_negatives = mask.any(axis=1)

    # Group-mean weights
    weights = np.zeros(pool.num_anchors)
    for kind in (SampleKind.HIGH_CONF, SampleKind.LOW_CONF):
        members = has_negatives & (pool.anchor_kinds == kind)
        count = int(members.sum())
        if count:
            weights[members] = 1.0 / count

    if not weights.any():
        trace.consumed = True
        return 0.0, GradientBuffer.zeros_like(params)

    pos_scores = np.einsum("ad,ad->a", anchors, positives)
    neg_scores = np.where(mask, anchors @ z.T, -np.inf)
    scores = np.concatenate([pos_scores[:, None], neg_scores], axis=1)
    normalizer = logsumexp(scores, axis=1)
    per_anchor = normalizer - pos_scores
    value = float(np.sum(weights * per_anchor))

    q = np.exp(scores - normalizer[:, None])
    grad_pos = weights * (q[:, 0] - 1.0)
    grad_neg = weights[:, None] * q[:, 1:]

    grad_anchors = grad_pos[:, None] * positives + grad_neg @ z
    grad_z = grad_neg.T @ anchors
    np.add.at(grad_z, pool.anchor_rows, grad_anchors)
    grad_proxies = pool.positive_weights.T @ (grad_pos[:, None] * anchors)
    return value, backward(params, trace, grad_z, grad_proxies)


# =============================================================================
# Global Proxy Tuning
# =============================================================================


def _distances(
    global_proxies: np.ndarray, client_proxies: np.ndarray, metric: DistanceMetric
) -> tuple[np.ndarray, np.ndarray]:
    """
    Pairwise distances phi(G^c, w_m^c') of shape (C, M, C') and dphi/dG^c of shape (C, M, C', d).
    """
    g = global_proxies[:, None, None, :]
    w = client_proxies[None, :, :, :]
    if metric == DistanceMetric.SQUARED_EUCLIDEAN:
        diff = g - w
        return np.sum(diff**2, axis=-1), 2.0 * diff

    g_norm = np.maximum(np.linalg.norm(g, axis=-1, keepdims=True), 1e-12)
    w_norm = np.maximum(np.linalg.norm(w, axis=-1, keepdims=True), 1e-12)
    dots = np.sum(g * w, axis=-1, keepdims=True)
    cosine = dots / (g_norm * w_norm)
    grad = -(w / (g_norm * w_norm) - dots * g / (g_norm**3 * w_norm))
    return 1.0 - cosine[..., 0], grad


def loss_gpt(
    global_proxies: np.ndarray,
    client_proxies: np.ndarray | list[np.ndarray],
    metric: DistanceMetric | str = DistanceMetric.SQUARED_EUCLIDEAN,
) -> tuple[float, np.ndarray]:
    """
    Global proxy tuning loss.

        L = sum_c sum_m -log( e^{-phi(G^c, w_m^c)} / sum_c' e^{-phi(G^c, w_m^c')} )

    Args:
        global_proxies: G, shape (C, d).
        client_proxies: M matrices of shape (C, d) (or one (M, C, d) array); constants.
        metric: Distance phi.

    Returns:
        Tuple of (value, dL/dG with shape (C, d)).

    Raises:
        ShapeError: If shapes disagree, C < 1 or M < 1.
    """
    metric = DistanceMetric(metric)
    g = np.asarray(global_proxies, dtype=np.float64)
    w = np.asarray(client_proxies, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] < 1:
        raise ShapeError(f"Global proxies must be (C, d) with C >= 1, got {g.shape}")
    if w.ndim != 3 or w.shape[0] < 1 or w.shape[1:] != g.shape:
        raise ShapeError(f"Client proxies must be (M, C, d) matching {g.shape}, got {w.shape}")

    num_classes = g.shape[0]
    phi, grad_phi = _distances(g, w, metric)
    logits = -phi
    own = np.arange(num_classes)
    value = float(np.sum(logsumexp(logits, axis=-1) - logits[own, :, own]))

    coef = softmax(logits)
    coef[own, :, own] -= 1.0
    # dL/dlogits = coef, dlogits/dG = -dphi/dG
    grad = -np.einsum("cmk,cmkd->cd", coef, grad_phi)
    return value, grad


def local_objective(
    supervised: float, unsupervised: float, icpl: float, weights: LossWeights
) -> float:
    """L_local = L_s + alpha * L_u + beta * L_ICPL."""
    return supervised + weights.alpha * unsupervised + weights.beta * icpl
