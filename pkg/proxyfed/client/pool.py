"""
Positive-negative proxy pool for the indecisive-categories contrastive loss.

Every unlabeled row of a batch is an anchor candidate. A high-confidence
anchor takes its pseudo-label's proxy as positive; a low-confidence anchor
takes a mixture of the proxies in its indecisive set, weighted by the local
model's probabilities renormalized over that set. Negatives are the other
batch rows whose category sets share no class with the anchor's.
"""

from dataclasses import dataclass

import numpy as np

from proxyfed.client.categories import CategoryBatch
from proxyfed.model.core import ModelParams, ShapeError
from proxyfed.utils import SampleKind


@dataclass(frozen=True)
class ProxyPool:
    """
    Anchors of one batch with their positive proxies and negative rows.

    Attributes:
        num_rows: Number of batch rows the pool indexes into.
        anchor_rows: Batch row of each kept anchor, shape (n_a,).
        anchor_kinds: HIGH_CONF or LOW_CONF per anchor, shape (n_a,).
        positive_weights: Mixing weights over proxy rows, shape (n_a, C); fixed.
        positive_proxies: Positive proxy vectors at build time, shape (n_a, d).
        negative_mask: negative_mask[a, j] is True iff row j is a negative of anchor a.
        dropped_empty_xi: Low-confidence rows dropped for an empty indecisive set.
        dropped_no_negatives: Anchors (any kind) dropped for having no negatives.
        dropped_low_conf: Low-confidence rows dropped for either reason.
    """

    num_rows: int
    anchor_rows: np.ndarray
    anchor_kinds: np.ndarray
    positive_weights: np.ndarray
    positive_proxies: np.ndarray
    negative_mask: np.ndarray
    dropped_empty_xi: int = 0
    dropped_no_negatives: int = 0
    dropped_low_conf: int = 0

    @property
    def num_anchors(self) -> int:
        return int(self.anchor_rows.shape[0])

    def negatives(self, anchor: int) -> np.ndarray:
        """Batch rows serving as negatives of the given anchor position."""
        return np.flatnonzero(self.negative_mask[anchor])

    def count(self, kind: SampleKind) -> int:
        return int((self.anchor_kinds == kind).sum())


def build_proxy_pool(
    params: ModelParams, categories: CategoryBatch, local_probs: np.ndarray
) -> ProxyPool:
    """
    Assemble the proxy pool over a batch.

    Args:
        params: Local model parameters (their proxies form the positives).
        categories: Kind and category membership of every batch row.
        local_probs: Local-model probabilities on the same rows, shape (n, C).

    Returns:
        ProxyPool. Labeled rows are never anchors but can be negatives.

    Raises:
        ShapeError: If the inputs disagree on row count or class count.
    """
    membership = np.asarray(categories.membership, dtype=bool)
    kinds = np.asarray(categories.kinds, dtype=np.int64)
    local_probs = np.atleast_2d(np.asarray(local_probs, dtype=np.float64))
    n, num_classes = membership.shape
    if kinds.shape != (n,) or local_probs.shape != (n, num_classes):
        raise ShapeError(
            f"Category batch ({n}, {num_classes}) does not match probabilities {local_probs.shape}"
        )
    if num_classes != params.num_classes:
        raise ShapeError(f"Batch has {num_classes} classes, model has {params.num_classes}")

    candidates = np.flatnonzero(kinds != SampleKind.LABELED)
    set_sizes = membership.sum(axis=1)
    empty_xi = candidates[(kinds[candidates] == SampleKind.LOW_CONF) & (set_sizes[candidates] == 0)]
    candidates = candidates[set_sizes[candidates] > 0]

    # Rows overlap when their category sets share a class
    overlap = (membership.astype(np.int64) @ membership.T.astype(np.int64)) > 0
    mask = ~overlap[candidates]
    mask[np.arange(len(candidates)), candidates] = False
    # Rows with an empty set overlap nothing; they still serve as negatives

    has_negatives = mask.any(axis=1)
    no_negatives = candidates[~has_negatives]
    rows = candidates[has_negatives]
    mask = mask[has_negatives]

    weights = np.zeros((len(rows), num_classes))
    proxies = np.zeros((len(rows), params.feature_dim))
    for a, row in enumerate(rows):
        if kinds[row] == SampleKind.HIGH_CONF:
            label = int(np.flatnonzero(membership[row])[0])
            weights[a, label] = 1.0
            proxies[a] = params.proxies[label]
            continue
        xi = np.flatnonzero(membership[row])
        mass = local_probs[row, xi]
        total = mass.sum()
        weights[a, xi] = mass / total if total > 0 else 1.0 / len(xi)
        proxies[a] = weights[a] @ params.proxies

    dropped_low = len(empty_xi) + int((kinds[no_negatives] == SampleKind.LOW_CONF).sum())
    return ProxyPool(
        num_rows=n,
        anchor_rows=rows,
        anchor_kinds=kinds[rows],
        positive_weights=weights,
        positive_proxies=proxies,
        negative_mask=mask,
        dropped_empty_xi=len(empty_xi),
        dropped_no_negatives=len(no_negatives),
        dropped_low_conf=dropped_low,
    )
