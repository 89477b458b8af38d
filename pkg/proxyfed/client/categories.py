"""
Confidence triage, category-set construction and prior statistics.
"""

from dataclasses import dataclass

import numpy as np

from proxyfed.config import AugmentConfig
from proxyfed.datagen import augment_weak
from proxyfed.model.core import ModelParams, predict
from proxyfed.utils import SampleKind, XiRule

TOP5_SIZE = 5


@dataclass(frozen=True)
class CategorySet:
    """
    Label evidence for one sample.

    Attributes:
        kind: LABELED, HIGH_CONF or LOW_CONF
        categories: Sorted class indices (a singleton unless LOW_CONF)
    """

    kind: SampleKind
    categories: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "categories", tuple(sorted(set(int(c) for c in self.categories))))
        if self.kind != SampleKind.LOW_CONF and len(self.categories) != 1:
            raise ValueError(f"{self.kind.name} category sets must be singletons")

    def overlaps(self, other: "CategorySet") -> bool:
        return bool(set(self.categories) & set(other.categories))


@dataclass(frozen=True)
class TriageResult:
    """
    Global-model verdicts for a batch of unlabeled samples.

    Attributes:
        weak_inputs: The weak-augmented view the verdicts were computed on.
        probs: ybar, softmax of the triage model, shape (n, C).
        high_confidence: max(ybar) > tau, shape (n,).
        pseudo_labels: argmax(ybar), lowest index on ties, shape (n,).
    """

    weak_inputs: np.ndarray
    probs: np.ndarray
    high_confidence: np.ndarray
    pseudo_labels: np.ndarray

    @property
    def num_high(self) -> int:
        return int(self.high_confidence.sum())

    @property
    def num_low(self) -> int:
        return int((~self.high_confidence).sum())


def verdicts_from_probs(probs: np.ndarray, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """Return (high_confidence mask, argmax pseudo-labels) for rows of probabilities."""
    probs = np.atleast_2d(probs)
    return probs.max(axis=1) > tau, np.argmax(probs, axis=1)


def triage_confidence(
    triage_params: ModelParams,
    unlabeled: np.ndarray,
    tau: float,
    augment: AugmentConfig,
    rng: np.random.Generator,
) -> TriageResult:
    """
    Split unlabeled samples into high- and low-confidence.

    Args:
        triage_params: Usually the round's broadcast global model.
        unlabeled: Raw unlabeled inputs (n, D).
        tau: Confidence threshold in (0, 1).
        augment: Augmentation strengths (weak view only).
        rng: Generator for the weak augmentation.
    """
    weak = augment_weak(unlabeled, augment, rng)
    if weak.shape[0] == 0:
        probs = np.zeros((0, triage_params.num_classes))
    else:
        probs = predict(triage_params, weak)
    high, pseudo = verdicts_from_probs(probs, tau) if len(probs) else (
        np.zeros(0, dtype=bool),
        np.zeros(0, dtype=np.int64),
    )
    return TriageResult(weak_inputs=weak, probs=probs, high_confidence=high, pseudo_labels=pseudo)


def indecisive_membership(probs: np.ndarray, prior: np.ndarray, rule: XiRule) -> np.ndarray:
    """
    Indecisive-categories sets as a boolean membership matrix.

    - prior: c in xi iff ybar(c) > prior(c)
    - top1:  the argmax class
    - top5:  the min(5, C) most probable classes
    """
    probs = np.atleast_2d(probs)
    n, num_classes = probs.shape
    if rule == XiRule.PRIOR:
        return probs > np.asarray(prior)[None, :]

    k = 1 if rule == XiRule.TOP1 else min(TOP5_SIZE, num_classes)
    # stable sort on -probs keeps the lowest index first among ties
    top = np.argsort(-probs, axis=1, kind="stable")[:, :k]
    membership = np.zeros((n, num_classes), dtype=bool)
    np.put_along_axis(membership, top, True, axis=1)
    return membership


def build_category_set(
    kind: SampleKind,
    probs: np.ndarray | None,
    prior: np.ndarray | None,
    true_label: int | None = None,
    rule: XiRule = XiRule.PRIOR,
) -> CategorySet:
    """
    Build one sample's category set.

    Labeled -> {y}; high-confidence -> {argmax ybar}; low-confidence -> xi by `rule`.
    An empty low-confidence set is returned as-is.
    """
    if kind == SampleKind.LABELED:
        if true_label is None:
            raise ValueError("Labeled samples need their ground-truth label")
        return CategorySet(kind=kind, categories=(int(true_label),))
    probs = np.asarray(probs, dtype=np.float64)
    if kind == SampleKind.HIGH_CONF:
        return CategorySet(kind=kind, categories=(int(np.argmax(probs)),))
    membership = indecisive_membership(probs[None, :], prior, rule)[0]
    return CategorySet(kind=kind, categories=tuple(np.flatnonzero(membership).tolist()))


@dataclass(frozen=True)
class CategoryBatch:
    """
    Category sets for every row of a batch.

    Attributes:
        kinds: SampleKind value per row, shape (n,).
        membership: membership[i, c] is True iff c in xi_i, shape (n, C).
    """

    kinds: np.ndarray
    membership: np.ndarray

    def __len__(self) -> int:
        return int(self.kinds.shape[0])

    def to_sets(self) -> list[CategorySet]:
        return [
            CategorySet(kind=SampleKind(int(k)), categories=tuple(np.flatnonzero(row).tolist()))
            for k, row in zip(self.kinds, self.membership)
        ]

    @classmethod
    def from_sets(cls, sets: list[CategorySet], num_classes: int) -> "CategoryBatch":
        membership = np.zeros((len(sets), num_classes), dtype=bool)
        for i, s in enumerate(sets):
            membership[i, list(s.categories)] = True
        kinds = np.array([int(s.kind) for s in sets], dtype=np.int64)
        return cls(kinds=kinds, membership=membership)


def one_hot_membership(labels: np.ndarray, num_classes: int) -> np.ndarray:
    membership = np.zeros((len(labels), num_classes), dtype=bool)
    membership[np.arange(len(labels)), np.asarray(labels, dtype=np.int64)] = True
    return membership


# =============================================================================
# Prior Statistics
# =============================================================================


@dataclass
class PriorStats:
    """Per-class counts from labeled ground truth and high-confidence pseudo-labels."""

    counts: np.ndarray

    @property
    def num_classes(self) -> int:
        return int(self.counts.shape[0])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def normalized(self) -> np.ndarray:
        """counts / total, or uniform when nothing was counted."""
        if self.total == 0:
            return np.full(self.num_classes, 1.0 / self.num_classes)
        return self.counts / self.total

    def __add__(self, other: "PriorStats") -> "PriorStats":
        return PriorStats(counts=self.counts + other.counts)

    @classmethod
    def empty(cls, num_classes: int) -> "PriorStats":
        return cls(counts=np.zeros(num_classes, dtype=np.int64))


def collect_prior_stats(
    labeled_labels: np.ndarray, high_conf_pseudo_labels: np.ndarray, num_classes: int
) -> PriorStats:
    """Count labeled ground truths plus high-confidence pseudo-labels per class."""
    counts = np.bincount(
        np.asarray(labeled_labels, dtype=np.int64), minlength=num_classes
    ) + np.bincount(np.asarray(high_conf_pseudo_labels, dtype=np.int64), minlength=num_classes)
    return PriorStats(counts=counts.astype(np.int64))


def uniform_prior(num_classes: int) -> np.ndarray:
    return np.full(num_classes, 1.0 / num_classes)
