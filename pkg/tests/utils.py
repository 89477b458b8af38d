"""
Test utilities and helpers for ProxyFed tests.

Provides small configurations and hand-built batches shared across test modules.
"""

import numpy as np

from proxyfed.datagen import ClientDataset, SampleSet


def tiny_config_data(**overrides) -> dict:
    """Raw key-value config for a run that finishes in well under a second."""
    data = {
        "master_seed": 11,
        "num_clients": 4,
        "clients_per_round": 2,
        "rounds": 2,
        "local_epochs": 1,
        "batch_size": 16,
        "input_dim": 4,
        "num_classes": 3,
        "samples_per_class": 40,
        "class_sphere_radius": 4.0,
        "class_noise_std": 0.5,
        "labeled_fraction": 0.25,
        "hidden_dim": 6,
        "feature_dim": 3,
        "gpt_epochs": 5,
        "dirichlet_alpha": 1.0,
    }
    data.update(overrides)
    return data


def make_client(
    rng: np.random.Generator,
    num_labeled: int = 6,
    num_unlabeled: int = 10,
    input_dim: int = 4,
    num_classes: int = 3,
    client_id: int = 0,
) -> ClientDataset:
    """A client with random features and labels."""

    def part(n: int, labeled: bool, first_id: int) -> SampleSet:
        return SampleSet(
            features=rng.normal(size=(n, input_dim)),
            labels=rng.integers(num_classes, size=n),
            is_labeled=np.full(n, labeled),
            ids=np.arange(first_id, first_id + n),
        )

    return ClientDataset(
        client_id=client_id,
        labeled=part(num_labeled, True, 0),
        unlabeled=part(num_unlabeled, False, num_labeled),
    )
