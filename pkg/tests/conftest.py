"""
Shared pytest fixtures for ProxyFed tests.
"""

import json
import logging

import numpy as np
import pytest

from proxyfed.config import DatasetSpec, FederationConfig
from proxyfed.model.core import ModelParams, init_params
from tests.utils import tiny_config_data


@pytest.fixture(autouse=True)
def clear_settings_cache():
    """Clear settings cache before and after each test."""
    from proxyfed.config import get_settings

    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture(autouse=True)
def reset_proxyfed_logger():
    """Undo setup_logging so caplog sees proxyfed records in every test."""
    yield
    logger = logging.getLogger("proxyfed")
    logger.handlers.clear()
    logger.setLevel(logging.NOTSET)
    logger.propagate = True


@pytest.fixture
def rng() -> np.random.Generator:
    """A fixed generator for test data."""
    return np.random.default_rng(1234)


@pytest.fixture
def small_params(rng) -> ModelParams:
    """A tiny model: D=4, one hidden layer of 6, d=3, C=3."""
    return init_params(4, (6,), 3, 3, rng)


@pytest.fixture
def small_spec() -> DatasetSpec:
    """A small, well-separated blob dataset."""
    return DatasetSpec(
        input_dim=4,
        num_classes=3,
        samples_per_class=60,
        class_sphere_radius=4.0,
        class_noise_std=0.5,
        labeled_fraction=0.2,
        test_fraction=0.25,
        seed=7,
    )


@pytest.fixture
def tiny_config() -> FederationConfig:
    """A validated FederationConfig for quick end-to-end runs."""
    return FederationConfig(**tiny_config_data())


@pytest.fixture
def config_file(tmp_path):
    """Write a tiny run config to disk and return its path."""
    path = tmp_path / "config.json"
    path.write_text(json.dumps(tiny_config_data()))
    return path
