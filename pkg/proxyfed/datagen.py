"""
Synthetic data generation, Dirichlet client partitioning and augmentation.

This module handles:
- Gaussian-blob classification data with stratified labeled / test splits
- Non-IID partitioning with independent labeled and unlabeled Dirichlet draws
- Weak (noise) and strong (noise + masking) augmentation
"""

import logging
from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np

from proxyfed.config import AugmentConfig, DatasetSpec
from proxyfed.utils import RngStream, derive_rng

logger = logging.getLogger(__name__)


class DatasetError(Exception):
    """Raised when a dataset specification cannot be realized."""

    pass


class PartitionError(Exception):
    """Raised when a client partition cannot be built."""

    pass


# =============================================================================
# Sample Containers
# =============================================================================


@dataclass(frozen=True)
class Sample:
    """One example. `true_label` is kept for evaluation even when unlabeled."""

    sample_id: int
    features: np.ndarray
    true_label: int
    is_labeled: bool


@dataclass(frozen=True)
class SampleSet:
    """
    Column-oriented collection of samples.

    Attributes:
        features: Matrix of shape (n, D)
        labels: Hidden ground-truth class per row, shape (n,)
        is_labeled: Whether the label is visible to training, shape (n,)
        ids: Stable sample ids, unique within one generated dataset, shape (n,)
    """

    features: np.ndarray
    labels: np.ndarray
    is_labeled: np.ndarray
    ids: np.ndarray

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def __iter__(self) -> Iterator[Sample]:
        for row in range(len(self)):
            yield Sample(
                sample_id=int(self.ids[row]),
                features=self.features[row],
                true_label=int(self.labels[row]),
                is_labeled=bool(self.is_labeled[row]),
            )

    @property
    def input_dim(self) -> int:
        return int(self.features.shape[1])

    def subset(self, rows: np.ndarray) -> "SampleSet":
        """Select rows (in the given order)."""
        rows = np.asarray(rows, dtype=np.int64)
        return SampleSet(
            features=self.features[rows],
            labels=self.labels[rows],
            is_labeled=self.is_labeled[rows],
            ids=self.ids[rows],
        )

    def with_labeled(self, flag: bool) -> "SampleSet":
        """Copy with every row's is_labeled set to `flag`."""
        return SampleSet(
            features=self.features,
            labels=self.labels,
            is_labeled=np.full(len(self), flag, dtype=bool),
            ids=self.ids,
        )

    def class_counts(self, num_classes: int) -> np.ndarray:
        return np.bincount(self.labels, minlength=num_classes)

    @classmethod
    def empty(cls, input_dim: int) -> "SampleSet":
        return cls(
            features=np.zeros((0, input_dim)),
            labels=np.zeros(0, dtype=np.int64),
            is_labeled=np.zeros(0, dtype=bool),
            ids=np.zeros(0, dtype=np.int64),
        )

    @classmethod
    def concat(cls, parts: list["SampleSet"]) -> "SampleSet":
        if not parts:
            raise ValueError("concat needs at least one part")
        return cls(
            features=np.concatenate([p.features for p in parts], axis=0),
            labels=np.concatenate([p.labels for p in parts]),
            is_labeled=np.concatenate([p.is_labeled for p in parts]),
            ids=np.concatenate([p.ids for p in parts]),
        )


@dataclass(frozen=True)
class ClientDataset:
    """A client's private partially-labeled dataset."""

    client_id: int
    labeled: SampleSet
    unlabeled: SampleSet

    @property
    def num_labeled(self) -> int:
        return len(self.labeled)

    @property
    def num_unlabeled(self) -> int:
        return len(self.unlabeled)

    @property
    def size(self) -> int:
        return self.num_labeled + self.num_unlabeled

    def all_samples(self) -> SampleSet:
        return SampleSet.concat([self.labeled, self.unlabeled])


# =============================================================================
# Generation
# =============================================================================


def _validate_spec(spec: DatasetSpec) -> None:
    if spec.num_classes < 2:
        raise DatasetError(f"num_classes must be >= 2, got {spec.num_classes}")
    if spec.input_dim < 1:
        raise DatasetError(f"input_dim must be >= 1, got {spec.input_dim}")
    if not 0 < spec.labeled_fraction <= 1:
        raise DatasetError(f"labeled_fraction must be in (0, 1], got {spec.labeled_fraction}")
    if not 0 < spec.test_fraction < 1:
        raise DatasetError(f"test_fraction must be in (0, 1), got {spec.test_fraction}")
    if spec.input_dim == 1 and spec.num_classes > 2:
        raise DatasetError("At most 2 distinct class means fit on the sphere in 1 dimension")


def _class_means(spec: DatasetSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw C distinct points uniformly on the sphere of the configured radius."""
    for _ in range(100):
        directions = rng.normal(size=(spec.num_classes, spec.input_dim))
        norms = np.linalg.norm(directions, axis=1, keepdims=True)
        if np.any(norms == 0):
            continue
        means = spec.class_sphere_radius * directions / norms
        gaps = np.linalg.norm(means[:, None, :] - means[None, :, :], axis=-1)
        np.fill_diagonal(gaps, np.inf)
        if gaps.min() > 1e-9 * spec.class_sphere_radius:
            return means
    raise DatasetError("Could not draw distinct class means")


def generate_blobs(spec: DatasetSpec) -> tuple[SampleSet, SampleSet]:
    """
    Generate a Gaussian-blob dataset.

    Class means lie on a sphere of radius `class_sphere_radius`; each class gets
    `samples_per_class` draws of mean + N(0, class_noise_std^2 I). Per class,
    round(test_fraction * n) samples go to the test set, and of the remaining
    train samples round(labeled_fraction * n_train) are marked labeled.

    Args:
        spec: Dataset description (seeded).

    Returns:
        Tuple of (train, test). Test samples are all marked labeled.

    Raises:
        DatasetError: If the specification is unrealizable.
    """
    _validate_spec(spec)
    rng = derive_rng(spec.seed, RngStream.DATA)
    means = _class_means(spec, rng)

    n = spec.samples_per_class
    train_parts: list[SampleSet] = []
    test_parts: list[SampleSet] = []

    for c in range(spec.num_classes):
        features = means[c] + spec.class_noise_std * rng.normal(size=(n, spec.input_dim))
        ids = np.arange(c * n, (c + 1) * n, dtype=np.int64)
        order = rng.permutation(n)

        n_test = int(round(spec.test_fraction * n))
        n_train = n - n_test
        n_labeled = int(round(spec.labeled_fraction * n_train))

        is_labeled = np.zeros(n, dtype=bool)
        is_labeled[order[n_test : n_test + n_labeled]] = True
        labels = np.full(n, c, dtype=np.int64)

        block = SampleSet(features=features, labels=labels, is_labeled=is_labeled, ids=ids)
        test_parts.append(block.subset(np.sort(order[:n_test])).with_labeled(True))
        train_parts.append(block.subset(np.sort(order[n_test:])))

    train = SampleSet.concat(train_parts)
    test = SampleSet.concat(test_parts)
    logger.debug(
        f"Generated {len(train)} train ({int(train.is_labeled.sum())} labeled) "
        f"and {len(test)} test samples"
    )
    return train, test


# =============================================================================
# Partitioning
# =============================================================================


def _dirichlet(rng: np.random.Generator, alpha: float, k: int) -> np.ndarray:
    proportions = rng.dirichlet(np.full(k, alpha))
    total = proportions.sum()
    if not np.all(np.isfinite(proportions)) or total <= 0:
        # Gamma underflow at tiny alpha: all mass on one client
        proportions = np.zeros(k)
        proportions[rng.integers(k)] = 1.0
        return proportions
    return proportions / total


def _split_multinomial(
    rows: np.ndarray, alpha: float, k: int, rng: np.random.Generator
) -> list[np.ndarray]:
    """Assign rows to k clients by a fresh Dirichlet(alpha) vector."""
    proportions = _dirichlet(rng, alpha, k)
    counts = rng.multinomial(len(rows), proportions)
    shuffled = rng.permutation(rows)
    return np.split(shuffled, np.cumsum(counts)[:-1])


def _labeled_totals(splits: list[list[np.ndarray]], k: int) -> np.ndarray:
    totals = np.zeros(k, dtype=np.int64)
    for per_class in splits:
        for client, rows in enumerate(per_class):
            totals[client] += len(rows)
    return totals


def partition_dirichlet(
    train: SampleSet,
    num_clients: int,
    dirichlet_alpha: float,
    seed: int,
    max_resample_attempts: int = 100,
) -> list[ClientDataset]:
    """
    Partition a training set across clients with per-class Dirichlet draws.

    For every class, one Dirichlet vector splits the labeled pool and an
    independent one splits the unlabeled pool. If a client ends up with no
    labeled samples, labeled draws are resampled class by class (round-robin);
    after `max_resample_attempts` one labeled sample is moved to each empty
    client from the client holding the most.

    Args:
        train: Training samples (labeled and unlabeled).
        num_clients: K.
        dirichlet_alpha: Concentration; smaller is more heterogeneous.
        seed: Partition seed.
        max_resample_attempts: Resamples before falling back to donation.

    Returns:
        K ClientDatasets whose union is `train`, disjoint.

    Raises:
        PartitionError: On invalid arguments or fewer labeled samples than clients.
    """
    if num_clients <= 0:
        raise PartitionError(f"num_clients must be positive, got {num_clients}")
    if dirichlet_alpha <= 0:
        raise PartitionError(f"dirichlet_alpha must be positive, got {dirichlet_alpha}")
    if len(train) == 0:
        raise PartitionError("Cannot partition an empty training set")

    labeled_rows = np.flatnonzero(train.is_labeled)
    if len(labeled_rows) < num_clients:
        raise PartitionError(
            f"{len(labeled_rows)} labeled samples cannot cover {num_clients} clients"
        )

    rng = derive_rng(seed, RngStream.PARTITION)
    classes = np.unique(train.labels)

    labeled_by_class = [
        np.flatnonzero(train.is_labeled & (train.labels == c)) for c in classes
    ]
    unlabeled_by_class = [
        np.flatnonzero(~train.is_labeled & (train.labels == c)) for c in classes
    ]

    labeled_splits = [
        _split_multinomial(rows, dirichlet_alpha, num_clients, rng) for rows in labeled_by_class
    ]
    unlabeled_splits = [
        _split_multinomial(rows, dirichlet_alpha, num_clients, rng) for rows in unlabeled_by_class
    ]

    resamplable = [i for i, rows in enumerate(labeled_by_class) if len(rows) > 0]
    attempt = 0
    while np.any(_labeled_totals(labeled_splits, num_clients) == 0):
        if attempt >= max_resample_attempts:
            _donate_labeled(labeled_splits, num_clients)
            break
        i = resamplable[attempt % len(resamplable)]
        labeled_splits[i] = _split_multinomial(
            labeled_by_class[i], dirichlet_alpha, num_clients, rng
        )
        attempt += 1

    clients = []
    for k in range(num_clients):
        lab = np.sort(np.concatenate([split[k] for split in labeled_splits]))
        unl = np.sort(np.concatenate([split[k] for split in unlabeled_splits]))
        clients.append(
            ClientDataset(
                client_id=k,
                labeled=train.subset(lab),
                unlabeled=train.subset(unl),
            )
        )
    return clients


def _donate_labeled(splits: list[list[np.ndarray]], k: int) -> None:
    """Move one labeled sample from the richest client to each empty client."""
    totals = _labeled_totals(splits, k)
    for empty in np.flatnonzero(totals == 0):
        donor = int(np.argmax(totals))
        class_idx = int(np.argmax([len(per_class[donor]) for per_class in splits]))
        rows = splits[class_idx][donor]
        splits[class_idx][donor] = rows[:-1]
        splits[class_idx][empty] = np.concatenate([splits[class_idx][empty], rows[-1:]])
        totals[donor] -= 1
        totals[empty] += 1
        logger.warning(f"Client {empty} had no labeled samples; moved one from client {donor}")


def label_distribution(samples: SampleSet, num_classes: int) -> np.ndarray:
    """Normalized class histogram (uniform for an empty set)."""
    counts = samples.class_counts(num_classes).astype(float)
    total = counts.sum()
    if total == 0:
        return np.full(num_classes, 1.0 / num_classes)
    return counts / total


def mean_total_variation(clients: list[ClientDataset], num_classes: int) -> float:
    """Average total-variation distance between client and global class distributions."""
    pooled = SampleSet.concat([c.all_samples() for c in clients])
    reference = label_distribution(pooled, num_classes)
    distances = [
        0.5 * np.abs(label_distribution(c.all_samples(), num_classes) - reference).sum()
        for c in clients
    ]
    return float(np.mean(distances))


# =============================================================================
# Augmentation
# =============================================================================


def augment_weak(x: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    """Additive Gaussian noise with std weak_noise_std."""
    return x + rng.normal(0.0, cfg.weak_noise_std, size=np.shape(x))


def augment_strong(x: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    """Additive Gaussian noise with std strong_noise_std, then per-coordinate zero masking."""
    if not 0 <= cfg.strong_mask_prob < 1:
        raise ValueError(f"strong_mask_prob must be in [0, 1), got {cfg.strong_mask_prob}")
    noisy = x + rng.normal(0.0, cfg.strong_noise_std, size=np.shape(x))
    keep = rng.random(np.shape(x)) >= cfg.strong_mask_prob
    return np.where(keep, noisy, 0.0)
