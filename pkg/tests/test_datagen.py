"""
Tests for synthetic data generation, partitioning and augmentation.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from proxyfed.config import AugmentConfig, DatasetSpec
from proxyfed.datagen import (
    DatasetError,
    PartitionError,
    Sample,
    SampleSet,
    augment_strong,
    augment_weak,
    generate_blobs,
    label_distribution,
    mean_total_variation,
    partition_dirichlet,
)


class TestGenerateBlobs:
    """Test Gaussian-blob generation."""

    def test_test_split_size(self):
        """Test that test_fraction=0.2 of 5x100 samples gives 100 test samples."""
        spec = DatasetSpec(num_classes=5, samples_per_class=100, test_fraction=0.2, seed=1)
        train, test = generate_blobs(spec)
        assert len(test) == 100
        assert len(train) == 400
        assert test.is_labeled.all()

    def test_labeled_fraction_is_stratified(self):
        """Test that each class has round(labeled_fraction * n_train) labeled samples."""
        spec = DatasetSpec(
            num_classes=5, samples_per_class=100, labeled_fraction=0.1, test_fraction=0.2, seed=2
        )
        train, _ = generate_blobs(spec)
        for c in range(5):
            in_class = train.labels == c
            assert int(train.is_labeled[in_class].sum()) == round(0.1 * in_class.sum())

    def test_zero_noise_collapses_to_means(self):
        """Test that class_noise_std=0 puts every sample on its class mean."""
        spec = DatasetSpec(num_classes=3, samples_per_class=10, class_noise_std=0.0, seed=3)
        train, test = generate_blobs(spec)
        samples = SampleSet.concat([train, test])
        for c in range(3):
            rows = samples.features[samples.labels == c]
            assert np.all(rows == rows[0])
            assert np.linalg.norm(rows[0]) == pytest.approx(spec.class_sphere_radius)

    def test_means_distinct(self):
        """Test that class means are distinct."""
        spec = DatasetSpec(num_classes=4, samples_per_class=10, class_noise_std=0.0, seed=4)
        train, _ = generate_blobs(spec)
        means = [train.features[train.labels == c][0] for c in range(4)]
        for i in range(4):
            for j in range(i + 1, 4):
                assert not np.allclose(means[i], means[j])

    def test_deterministic(self, small_spec):
        """Test that identical seeds produce identical datasets."""
        a_train, a_test = generate_blobs(small_spec)
        b_train, b_test = generate_blobs(small_spec)
        np.testing.assert_array_equal(a_train.features, b_train.features)
        np.testing.assert_array_equal(a_train.is_labeled, b_train.is_labeled)
        np.testing.assert_array_equal(a_test.features, b_test.features)

    def test_ids_unique(self, small_spec):
        """Test that sample ids are unique across train and test."""
        train, test = generate_blobs(small_spec)
        ids = np.concatenate([train.ids, test.ids])
        assert len(np.unique(ids)) == len(ids)

    def test_one_dimension_many_classes_rejected(self):
        """Test that D=1 cannot hold more than two distinct means."""
        with pytest.raises(DatasetError):
            generate_blobs(DatasetSpec(input_dim=1, num_classes=3, seed=0))

    def test_invalid_class_count_rejected(self):
        """Test that C < 2 is rejected by DatasetSpec."""
        with pytest.raises(ValidationError):
            DatasetSpec(num_classes=1)

    def test_iterates_samples(self, small_spec):
        """Test that a SampleSet iterates as Sample values."""
        train, _ = generate_blobs(small_spec)
        first = next(iter(train))
        assert isinstance(first, Sample)
        assert first.features.shape == (small_spec.input_dim,)
        assert first.true_label == int(train.labels[0])


class TestPartitionDirichlet:
    """Test Dirichlet client partitioning."""

    def test_complete_and_disjoint(self, small_spec):
        """Test exact partitions of train over 100 random client counts, alphas and seeds."""
        train, _ = generate_blobs(small_spec)
        rng = np.random.default_rng(2718)
        for _ in range(100):
            num_clients = int(rng.integers(1, 11))
            alpha = float(10 ** rng.uniform(-2, 1))
            seed = int(rng.integers(10**6))
            clients = partition_dirichlet(
                train, num_clients=num_clients, dirichlet_alpha=alpha, seed=seed
            )
            assert len(clients) == num_clients
            ids = np.concatenate([c.all_samples().ids for c in clients])
            assert len(ids) == len(train)
            assert len(np.unique(ids)) == len(ids)
            np.testing.assert_array_equal(np.sort(ids), np.sort(train.ids))

    def test_every_client_has_labeled(self, small_spec):
        """Test that every client gets at least one labeled sample."""
        train, _ = generate_blobs(small_spec)
        for seed in range(10):
            clients = partition_dirichlet(train, num_clients=8, dirichlet_alpha=0.1, seed=seed)
            assert all(c.num_labeled >= 1 for c in clients)
            assert all(c.labeled.is_labeled.all() for c in clients)
            assert not any(c.unlabeled.is_labeled.any() for c in clients)

    def test_donation_fallback(self, small_spec):
        """Test that coverage holds even with no resampling allowed."""
        train, _ = generate_blobs(small_spec)
        clients = partition_dirichlet(
            train, num_clients=10, dirichlet_alpha=0.01, seed=0, max_resample_attempts=0
        )
        assert all(c.num_labeled >= 1 for c in clients)
        assert sum(c.size for c in clients) == len(train)

    def test_single_client(self, small_spec):
        """Test that K=1 holds all of train."""
        train, _ = generate_blobs(small_spec)
        (client,) = partition_dirichlet(train, num_clients=1, dirichlet_alpha=0.5, seed=0)
        assert client.size == len(train)

    def test_large_alpha_is_near_uniform(self):
        """Test that alpha=1e6 gives each of 4 clients about 1/4 of every class."""
        spec = DatasetSpec(
            input_dim=2,
            num_classes=2,
            samples_per_class=10000,
            labeled_fraction=0.5,
            test_fraction=0.2,
            seed=5,
        )
        train, _ = generate_blobs(spec)
        clients = partition_dirichlet(train, num_clients=4, dirichlet_alpha=1e6, seed=5)
        totals = train.class_counts(2)
        for client in clients:
            shares = client.all_samples().class_counts(2) / totals
            np.testing.assert_allclose(shares, 0.25, atol=0.02)

    def test_heterogeneity_monotone(self):
        """Test that mean total variation is larger at alpha=0.1 than at alpha=10."""
        spec = DatasetSpec(num_classes=5, samples_per_class=100, labeled_fraction=0.2, seed=9)
        train, _ = generate_blobs(spec)

        def mean_tv(alpha: float) -> float:
            return float(
                np.mean(
                    [
                        mean_total_variation(partition_dirichlet(train, 10, alpha, seed), 5)
                        for seed in range(20)
                    ]
                )
            )

        assert mean_tv(0.1) > mean_tv(10.0)

    def test_deterministic(self, small_spec):
        """Test that identical seeds give identical partitions."""
        train, _ = generate_blobs(small_spec)
        a = partition_dirichlet(train, 4, 0.5, seed=21)
        b = partition_dirichlet(train, 4, 0.5, seed=21)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.labeled.ids, y.labeled.ids)
            np.testing.assert_array_equal(x.unlabeled.ids, y.unlabeled.ids)

    def test_invalid_arguments(self, small_spec):
        """Test that K <= 0 and alpha <= 0 are rejected."""
        train, _ = generate_blobs(small_spec)
        with pytest.raises(PartitionError):
            partition_dirichlet(train, 0, 0.5, seed=0)
        with pytest.raises(PartitionError):
            partition_dirichlet(train, 4, 0.0, seed=0)

    def test_too_few_labeled(self, small_spec):
        """Test that fewer labeled samples than clients is rejected."""
        train, _ = generate_blobs(small_spec)
        with pytest.raises(PartitionError):
            partition_dirichlet(train, int(train.is_labeled.sum()) + 1, 0.5, seed=0)

    def test_label_distribution_empty_is_uniform(self):
        """Test the uniform fallback for an empty set."""
        np.testing.assert_allclose(label_distribution(SampleSet.empty(3), 4), 0.25)


class TestAugmentation:
    """Test weak and strong augmentation."""

    def test_weak_identity_at_zero_noise(self, rng):
        """Test that sigma_w=0 leaves inputs unchanged."""
        x = rng.normal(size=(5, 3))
        cfg = AugmentConfig(weak_noise_std=0.0)
        np.testing.assert_array_equal(augment_weak(x, cfg, np.random.default_rng(0)), x)

    def test_strong_identity_at_zero(self, rng):
        """Test that sigma_s=0 and mask 0 leave inputs unchanged."""
        x = rng.normal(size=(5, 3))
        cfg = AugmentConfig(weak_noise_std=0.0, strong_noise_std=0.0, strong_mask_prob=0.0)
        np.testing.assert_array_equal(augment_strong(x, cfg, np.random.default_rng(0)), x)

    def test_mask_rate(self):
        """Test that about strong_mask_prob of coordinates are zeroed."""
        cfg = AugmentConfig(weak_noise_std=0.0, strong_noise_std=0.0, strong_mask_prob=0.3)
        out = augment_strong(np.ones((100, 100)), cfg, np.random.default_rng(1))
        assert np.mean(out == 0.0) == pytest.approx(0.3, abs=0.02)

    def test_mask_prob_one_rejected(self):
        """Test that strong_mask_prob=1 is rejected."""
        with pytest.raises(ValidationError):
            AugmentConfig(strong_mask_prob=1.0)
        cfg = AugmentConfig.model_construct(
            weak_noise_std=0.0, strong_noise_std=0.0, strong_mask_prob=1.0
        )
        with pytest.raises(ValueError):
            augment_strong(np.ones(3), cfg, np.random.default_rng(0))

    def test_deterministic_given_rng_state(self, rng):
        """Test that equal generator states give equal views."""
        x = rng.normal(size=(4, 3))
        cfg = AugmentConfig()
        a = augment_strong(x, cfg, np.random.default_rng(5))
        b = augment_strong(x, cfg, np.random.default_rng(5))
        np.testing.assert_array_equal(a, b)

    def test_strong_requires_more_noise(self):
        """Test that sigma_s < sigma_w is rejected."""
        with pytest.raises(ValidationError):
            AugmentConfig(weak_noise_std=0.5, strong_noise_std=0.1)
