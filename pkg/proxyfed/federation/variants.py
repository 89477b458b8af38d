"""
Named ablation presets.

Each preset is a set of FederationConfig overrides; `variant=<name>` in a
run config applies one before the explicit keys.
"""

from types import MappingProxyType
from typing import Any

from proxyfed.config import FederationConfig

_BASELINE = {"low_conf_mode": "discard", "loss_beta": 0.0, "gpt_enabled": False}
_GPL_ALL = {"low_conf_mode": "direct", "loss_beta": 0.0, "gpt_enabled": False}

VARIANTS: MappingProxyType[str, dict[str, Any]] = MappingProxyType(
    {
        "baseline": _BASELINE,
        "gpt_only": {"low_conf_mode": "discard", "loss_beta": 0.0, "gpt_enabled": True},
        "icpl_only": {"low_conf_mode": "icpl", "gpt_enabled": False},
        "full": {"low_conf_mode": "icpl", "gpt_enabled": True},
        "gpl_all": _GPL_ALL,
        "lpl": {**_BASELINE, "pseudo_label_source": "local"},
        "lpl_all": {**_GPL_ALL, "pseudo_label_source": "local"},
        "fedavg": {"use_unlabeled": False, "gpt_enabled": False},
    }
)


def variant_overrides(name: str) -> dict[str, Any]:
    """
    Config overrides of a named variant.

    Raises:
        KeyError: With a message listing the known names.
    """
    try:
        return dict(VARIANTS[name])
    except KeyError:
        raise KeyError(f"Unknown variant '{name}' (known: {', '.join(VARIANTS)})") from None


def apply_variant(cfg: FederationConfig, name: str) -> FederationConfig:
    """Return a new validated config with the variant's overrides applied."""
    data = {**cfg.model_dump(), **variant_overrides(name)}
    return type(cfg).model_validate(data)
