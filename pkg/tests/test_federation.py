"""
Tests for round orchestration, evaluation and ablation variants.
"""

import numpy as np
import pytest

from proxyfed.client import ClientRoundStats
from proxyfed.config import FederationConfig
from proxyfed.datagen import SampleSet
from proxyfed.federation import (
    VARIANTS,
    DivergenceError,
    apply_variant,
    evaluate_global,
    indecisive_recall,
    initial_model,
    low_confidence_rates,
    pseudo_label_accuracy,
    run_federation,
    variant_overrides,
)
from proxyfed.model import DenseLayer, ModelParams, ShapeError, init_params
from proxyfed.server import GlobalState, TuningResult, comm_cost
from proxyfed.utils import LowConfMode, XiRule
from tests.utils import tiny_config_data


def _metric_rows(result) -> list[dict]:
    return [m.model_dump(exclude={"wall_time"}) for m in result.metrics]


def _test_set(labels: list[int], input_dim: int = 2) -> SampleSet:
    n = len(labels)
    return SampleSet(
        features=np.random.default_rng(0).normal(size=(n, input_dim)),
        labels=np.array(labels),
        is_labeled=np.ones(n, dtype=bool),
        ids=np.arange(n),
    )


def _zero_proxy_params(num_classes: int) -> ModelParams:
    return ModelParams(
        layers=(DenseLayer(weight=np.eye(2), bias=np.zeros(2)),),
        proxies=np.zeros((num_classes, 2)),
    )


class TestRunFederation:
    """Test end-to-end federation runs."""

    def test_zero_rounds(self):
        """Test that T=0 returns the initial state and no metrics."""
        cfg = FederationConfig(**tiny_config_data(rounds=0))
        result = run_federation(cfg)
        assert result.metrics == []
        assert result.state.round == 0
        np.testing.assert_allclose(result.state.prior, 1 / 3)
        np.testing.assert_array_equal(
            result.state.params.flatten(), initial_model(cfg).flatten()
        )

    def test_three_rounds(self):
        """Test that T=3 yields exactly three rows numbered 1..3."""
        result = run_federation(FederationConfig(**tiny_config_data(rounds=3)))
        assert [m.round for m in result.metrics] == [1, 2, 3]
        assert result.state.round == 3
        assert result.state.prior.sum() == pytest.approx(1.0)

    def test_metrics_ranges(self, tiny_config):
        """Test per-round metric ranges and the communication cost."""
        result = run_federation(tiny_config)
        params = result.state.params
        expected_cost = comm_cost(
            params.num_parameters, tiny_config.num_classes, tiny_config.clients_per_round
        )
        for row in result.metrics:
            assert 0.0 <= row.test_accuracy <= 1.0
            assert 0 <= row.excluded_count <= row.unlabeled_seen
            assert row.comm_cost == expected_cost
            assert row.loss_gpt >= 0.0
            if row.pseudo_label_accuracy is not None:
                assert 0.0 <= row.pseudo_label_accuracy <= 1.0

    def test_thread_count_does_not_change_results(self):
        """Test that one worker and four workers produce identical runs."""
        cfg = FederationConfig(**tiny_config_data(rounds=2, num_clients=6, clients_per_round=4))
        serial = run_federation(cfg, threads=1)
        parallel = run_federation(cfg, threads=4)
        assert _metric_rows(serial) == _metric_rows(parallel)
        np.testing.assert_array_equal(
            serial.state.params.flatten(), parallel.state.params.flatten()
        )

    def test_same_seed_same_run(self, tiny_config):
        """Test determinism across repeated runs."""
        assert _metric_rows(run_federation(tiny_config)) == _metric_rows(
            run_federation(tiny_config)
        )

    def test_seeds_differ(self):
        """Test that another master seed gives another run."""
        a = run_federation(FederationConfig(**tiny_config_data(master_seed=1)))
        b = run_federation(FederationConfig(**tiny_config_data(master_seed=2)))
        assert not np.array_equal(a.state.params.flatten(), b.state.params.flatten())

    def test_initial_params_used(self, tiny_config):
        """Test that given initial params replace the random init."""
        params = init_params(4, (5,), 2, 3, np.random.default_rng(0))
        result = run_federation(tiny_config.model_copy(update={"rounds": 0}), params)
        assert result.state.params is params

    def test_initial_params_shape_checked(self, tiny_config):
        """Test that params for another input width are rejected."""
        params = init_params(7, (5,), 2, 3, np.random.default_rng(0))
        with pytest.raises(ShapeError):
            run_federation(tiny_config, params)

    def test_labeled_only_variant(self):
        """Test that the fedavg preset excludes every unlabeled row."""
        cfg = apply_variant(FederationConfig(**tiny_config_data()), "fedavg")
        result = run_federation(cfg)
        for row in result.metrics:
            assert row.excluded_count == row.unlabeled_seen
            assert row.pseudo_label_accuracy is None

    def test_direct_variant_excludes_nothing(self):
        """Test that direct pseudo-labeling leaves nothing out."""
        cfg = apply_variant(FederationConfig(**tiny_config_data()), "gpl_all")
        assert all(row.excluded_count == 0 for row in run_federation(cfg).metrics)


class TestDivergence:
    """Test the per-round finiteness check."""

    @staticmethod
    def _nan_tuning(monkeypatch):
        def fake_tuning(init, client_proxies, cfg):
            return TuningResult(
                proxies=np.full_like(init, np.nan), trace=[0.0], learning_rate=0.005
            )

        monkeypatch.setattr("proxyfed.federation.runner.tune_global_proxies", fake_tuning)

    def test_nan_proxies_raise(self, tiny_config, monkeypatch, caplog):
        """Test that NaN global proxies stop the run with an ERROR record."""
        self._nan_tuning(monkeypatch)
        with pytest.raises(DivergenceError, match="Round 1: non-finite params"):
            run_federation(tiny_config)
        assert any(
            r.levelname == "ERROR" and "non-finite" in r.getMessage() for r in caplog.records
        )

    def test_contrastive_weight_one_stays_finite(self):
        """Test a strongly non-IID full run at beta=1 and lr=0.1."""
        cfg = FederationConfig(
            **tiny_config_data(
                num_clients=6,
                clients_per_round=3,
                rounds=8,
                samples_per_class=60,
                input_dim=16,
                dirichlet_alpha=0.1,
                loss_beta=1.0,
                local_lr=0.1,
            )
        )
        result = run_federation(apply_variant(cfg, "full"))
        assert len(result.metrics) == 8
        assert np.all(np.isfinite(result.state.params.flatten()))
        for row in result.metrics:
            assert np.isfinite([row.loss_s, row.loss_u, row.loss_icpl, row.loss_gpt]).all()


class TestEvaluation:
    """Test accuracy and pseudo-label quality."""

    def test_always_class_zero(self):
        """Test a model predicting class 0 on an all-zero-class test set."""
        state = GlobalState.initial(_zero_proxy_params(3))
        assert evaluate_global(state, _test_set([0] * 6)) == 1.0

    def test_uniform_model_balanced_set(self):
        """Test that a zero-proxy model scores 1/C on a balanced set."""
        params = _zero_proxy_params(4)
        assert evaluate_global(params, _test_set([0, 1, 2, 3] * 5)) == pytest.approx(0.25)

    def test_empty_test_set(self):
        """Test that an empty test set is rejected."""
        with pytest.raises(ValueError):
            evaluate_global(_zero_proxy_params(2), SampleSet.empty(2))

    def test_pseudo_label_accuracy(self):
        """Test the hc accuracy and its absence without hc samples."""
        stats = [
            ClientRoundStats(client_id=0, num_samples=10, hc_count=3, hc_correct=3),
            ClientRoundStats(client_id=1, num_samples=10, hc_count=1, hc_correct=1),
        ]
        assert pseudo_label_accuracy(stats) == 1.0
        assert pseudo_label_accuracy([ClientRoundStats(client_id=0, num_samples=1)]) is None

    def test_low_confidence_rates(self):
        """Test pooled recall and top-1 accuracy."""
        stats = [
            ClientRoundStats(client_id=0, num_samples=5, lc_count=4, lc_in_xi=3, lc_top1_correct=1),
            ClientRoundStats(client_id=1, num_samples=5, lc_count=4, lc_in_xi=1, lc_top1_correct=1),
        ]
        assert low_confidence_rates(stats) == (0.5, 0.25)
        assert low_confidence_rates([]) == (None, None)

    def test_recall_dominates_top1_under_uniform_prior(self, rng):
        """Test that the argmax is always in xi when the prior is uniform."""
        probs = rng.dirichlet(np.ones(5), size=200)
        labels = rng.integers(5, size=200)
        report = indecisive_recall(probs, labels, np.full(5, 0.2), 0.95)
        assert report.num_low_confidence > 0
        assert report.recall >= report.top1_accuracy

    def test_top5_recall(self, rng):
        """Test that top-5 sets cover every class when C <= 5."""
        probs = rng.dirichlet(np.ones(4), size=50)
        labels = rng.integers(4, size=50)
        report = indecisive_recall(probs, labels, np.full(4, 0.25), 0.99, XiRule.TOP5)
        assert report.recall == 1.0
        assert report.mean_set_size == 4.0

    def test_no_low_confidence(self):
        """Test the report when every sample is confident."""
        report = indecisive_recall(np.array([[0.99, 0.01]]), np.array([0]), np.full(2, 0.5), 0.9)
        assert report.recall is None
        assert report.low_confidence_fraction == 0.0


class TestVariants:
    """Test ablation presets."""

    def test_every_variant_validates(self):
        """Test that every preset yields a valid config."""
        base = FederationConfig(**tiny_config_data())
        for name in VARIANTS:
            assert isinstance(apply_variant(base, name), FederationConfig)

    def test_baseline(self):
        """Test the baseline preset."""
        cfg = apply_variant(FederationConfig(**tiny_config_data()), "baseline")
        assert cfg.low_conf_mode == LowConfMode.DISCARD
        assert cfg.loss_beta == 0.0
        assert cfg.gpt.epochs == 0

    def test_unknown_variant(self):
        """Test that the error lists the known names."""
        with pytest.raises(KeyError, match="baseline"):
            variant_overrides("missing")

    def test_overrides_are_copies(self):
        """Test that callers cannot mutate the presets."""
        variant_overrides("full")["gpt_enabled"] = False
        assert VARIANTS["full"]["gpt_enabled"] is True
