"""
Configuration management for ProxyFed.

Two layers of configuration exist:

1. Process settings (`Settings`), loaded from environment variables (PROXYFED_*)
   with built-in defaults: worker threads, logging, output directory.
2. Run configuration (`FederationConfig` / `RunConfigFile`), loaded from a flat
   JSON document plus `--set key=value` overrides. It fully determines a run.
"""

import json
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from proxyfed.utils import DistanceMetric, LowConfMode, PseudoLabelSource, XiRule


class ConfigurationError(Exception):
    """Raised when configuration is invalid or missing."""

    pass


# =============================================================================
# Process Settings
# =============================================================================


class Settings(BaseSettings):
    """
    ProxyFed process settings.

    Settings can be configured via:
    - Environment variables with PROXYFED_ prefix
    - Default values
    """

    model_config = SettingsConfigDict(
        env_prefix="PROXYFED_",
        case_sensitive=False,
        extra="ignore",
    )

    threads: int = Field(default=1, ge=1, description="Worker threads for clients and sweep cells")
    debug: bool = Field(default=False, description="Enable debug logging")
    log_level: str = Field(default="info", description="Logging level")
    log_format: str = Field(
        default="text",
        description="Logging format: 'json' for structured logs, 'text' for human-readable",
    )
    output_dir: str = Field(default="./runs", description="Default directory for run outputs")

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Ensure log level is valid."""
        valid_levels = {"debug", "info", "warning", "error", "critical"}
        if v.lower() not in valid_levels:
            raise ValueError(f"log_level must be one of {valid_levels}")
        return v.lower()

    @field_validator("log_format")
    @classmethod
    def validate_log_format(cls, v: str) -> str:
        """Ensure log format is valid."""
        valid_formats = {"text", "json"}
        if v.lower() not in valid_formats:
            raise ValueError(f"log_format must be one of {valid_formats}")
        return v.lower()


def get_settings() -> Settings:
    """
    Load and return cached process settings.

    Uses manual caching for singleton behavior while remaining testable.
    Tests can clear cache with get_settings.cache_clear().
    """
    if get_settings._cache is not None:
        return get_settings._cache

    settings_instance = Settings()
    get_settings._cache = settings_instance
    return settings_instance


def _cache_clear() -> None:
    """Clear the settings cache."""
    get_settings._cache = None


get_settings.cache_clear = _cache_clear
get_settings._cache = None


def settings() -> Settings:
    """Get the cached settings instance."""
    return get_settings()


def reload_settings() -> Settings:
    """Reload settings by clearing cache and loading fresh."""
    get_settings._cache = None
    return get_settings()


# =============================================================================
# Typed Sub-Configurations
# =============================================================================


class DatasetSpec(BaseModel):
    """Synthetic Gaussian-blob dataset description."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    input_dim: int = Field(default=16, ge=1)
    num_classes: int = Field(default=5, ge=2)
    samples_per_class: int = Field(default=200, ge=1)
    class_sphere_radius: float = Field(default=3.0, gt=0)
    class_noise_std: float = Field(default=1.0, ge=0)
    labeled_fraction: float = Field(default=0.1, gt=0, le=1)
    test_fraction: float = Field(default=0.2, gt=0, lt=1)
    seed: int = 0


class AugmentConfig(BaseModel):
    """Weak / strong augmentation strengths."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    weak_noise_std: float = Field(default=0.1, ge=0)
    strong_noise_std: float = Field(default=0.5, ge=0)
    strong_mask_prob: float = Field(default=0.2, ge=0, lt=1)

    @model_validator(mode="after")
    def check_strong_dominates(self) -> "AugmentConfig":
        """Strong augmentation must perturb at least as much as weak."""
        if self.strong_noise_std < self.weak_noise_std:
            raise ValueError("strong_noise_std must be >= weak_noise_std")
        return self


class GptConfig(BaseModel):
    """Global proxy tuning hyper-parameters. Q = 0 disables tuning."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    learning_rate: float = Field(default=0.005, gt=0)
    epochs: int = Field(default=100, ge=0)
    metric: DistanceMetric = DistanceMetric.SQUARED_EUCLIDEAN
    max_halvings: int = Field(default=20, ge=0)


class LossWeights(BaseModel):
    """Weights of L_u and L_ICPL in the local objective."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    alpha: float = Field(default=1.0, ge=0)
    beta: float = Field(default=1.0, ge=0)


# =============================================================================
# Run Configuration
# =============================================================================


class FederationConfig(BaseModel):
    """
    Flat run configuration.

    Every scalar of the simulation lives here under one key; the typed
    sub-configurations are exposed as properties.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    # Federation
    num_clients: int = Field(default=20, ge=1, description="K")
    clients_per_round: int = Field(default=8, ge=1, description="M")
    rounds: int = Field(default=30, ge=0, description="T")
    local_epochs: int = Field(default=5, ge=0, description="E")
    local_lr: float = Field(default=0.1, gt=0, description="eta_l")
    confidence_threshold: float = Field(default=0.95, gt=0, lt=1, description="tau")
    batch_size: int = Field(default=32, ge=1)
    loss_alpha: float = Field(default=1.0, ge=0)
    loss_beta: float = Field(default=1.0, ge=0)
    dirichlet_alpha: float = Field(default=0.5, gt=0)
    max_resample_attempts: int = Field(default=100, ge=0)
    local_step_guard: bool = True

    # Model
    hidden_dim: int = Field(default=32, ge=1)
    feature_dim: int = Field(default=16, ge=1)

    # Dataset
    input_dim: int = Field(default=16, ge=1)
    num_classes: int = Field(default=5, ge=2)
    samples_per_class: int = Field(default=200, ge=1)
    class_sphere_radius: float = Field(default=3.0, gt=0)
    class_noise_std: float = Field(default=1.0, ge=0)
    labeled_fraction: float = Field(default=0.1, gt=0, le=1)
    test_fraction: float = Field(default=0.2, gt=0, lt=1)

    # Augmentation
    weak_noise_std: float = Field(default=0.1, ge=0)
    strong_noise_std: float = Field(default=0.5, ge=0)
    strong_mask_prob: float = Field(default=0.2, ge=0, lt=1)

    # Global proxy tuning
    gpt_enabled: bool = True
    gpt_lr: float = Field(default=0.005, gt=0)
    gpt_epochs: int = Field(default=100, ge=0)
    gpt_metric: DistanceMetric = DistanceMetric.SQUARED_EUCLIDEAN

    # Ablation switches
    low_conf_mode: LowConfMode = LowConfMode.ICPL
    xi_rule: XiRule = XiRule.PRIOR
    pseudo_label_source: PseudoLabelSource = PseudoLabelSource.GLOBAL
    use_unlabeled: bool = True

    master_seed: int

    @model_validator(mode="after")
    def check_cross_field(self) -> "FederationConfig":
        """Validate invariants spanning several keys."""
        if self.clients_per_round > self.num_clients:
            raise ValueError("clients_per_round must be <= num_clients")
        if self.strong_noise_std < self.weak_noise_std:
            raise ValueError("strong_noise_std must be >= weak_noise_std")
        return self

    @property
    def dataset_spec(self) -> DatasetSpec:
        return DatasetSpec(
            input_dim=self.input_dim,
            num_classes=self.num_classes,
            samples_per_class=self.samples_per_class,
            class_sphere_radius=self.class_sphere_radius,
            class_noise_std=self.class_noise_std,
            labeled_fraction=self.labeled_fraction,
            test_fraction=self.test_fraction,
            seed=self.master_seed,
        )

    @property
    def augment(self) -> AugmentConfig:
        return AugmentConfig(
            weak_noise_std=self.weak_noise_std,
            strong_noise_std=self.strong_noise_std,
            strong_mask_prob=self.strong_mask_prob,
        )

    @property
    def gpt(self) -> GptConfig:
        return GptConfig(
            learning_rate=self.gpt_lr,
            epochs=self.gpt_epochs if self.gpt_enabled else 0,
            metric=self.gpt_metric,
        )

    @property
    def loss_weights(self) -> LossWeights:
        return LossWeights(alpha=self.loss_alpha, beta=self.loss_beta)


class RunConfigFile(FederationConfig):
    """FederationConfig plus output file names, as stored on disk."""

    metrics_filename: str = "metrics.csv"
    summary_filename: str = "summary.json"

    def federation_config(self) -> FederationConfig:
        """Strip the output keys."""
        return FederationConfig(**self.model_dump(exclude=set(OUTPUT_KEYS)))


OUTPUT_KEYS = ("metrics_filename", "summary_filename")


# =============================================================================
# Loading
# =============================================================================


def parse_override(item: str) -> tuple[str, Any]:
    """
    Parse a `key=value` override.

    The value is decoded as a JSON scalar when possible (numbers, true/false,
    null), otherwise kept as a string.

    Raises:
        ConfigurationError: If the item has no '='.
    """
    if "=" not in item:
        raise ConfigurationError(f"Override '{item}' must have the form key=value")
    key, raw = item.split("=", 1)
    key = key.strip()
    raw = raw.strip()
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def build_run_config(data: dict[str, Any]) -> RunConfigFile:
    """
    Validate a raw key-value mapping into a RunConfigFile.

    A `variant` key, if present, applies a named ablation preset first;
    explicit keys in the mapping win over the preset.

    Raises:
        ConfigurationError: Naming the offending key(s).
    """
    data = dict(data)
    variant = data.pop("variant", None)
    if variant is not None:
        from proxyfed.federation.variants import variant_overrides

        try:
            preset = variant_overrides(str(variant))
        except KeyError as e:
            raise ConfigurationError(f"variant: {e.args[0]}") from e
        data = {**preset, **data}

    try:
        return RunConfigFile(**data)
    except ValidationError as e:
        problems = []
        for err in e.errors():
            loc = ".".join(str(p) for p in err["loc"]) or "config"
            problems.append(f"{loc}: {err['msg']}")
        raise ConfigurationError("; ".join(problems)) from e


def read_config_data(path: Path, overrides: list[str] | None = None) -> dict[str, Any]:
    """
    Read a run configuration file as a raw mapping and apply overrides.

    Raises:
        ConfigurationError: If the file is unreadable or not a JSON object.
    """
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigurationError(f"Cannot read config {path}: {e}") from e

    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Config {path} is not valid JSON: {e}") from e

    if not isinstance(data, dict):
        raise ConfigurationError(f"Config {path} must be a JSON object")

    for item in overrides or []:
        key, value = parse_override(item)
        data[key] = value
    return data


def load_run_config(path: Path, overrides: list[str] | None = None) -> RunConfigFile:
    """
    Load a run configuration file and apply overrides.

    Args:
        path: Path to a flat JSON object.
        overrides: Items of the form key=value applied on top of the file.

    Returns:
        Validated RunConfigFile.

    Raises:
        ConfigurationError: If the file is unreadable, not a JSON object, or invalid.
    """
    return build_run_config(read_config_data(path, overrides))


def config_keys() -> set[str]:
    """Keys a run configuration document may contain."""
    return set(RunConfigFile.model_fields) | {"variant"}
