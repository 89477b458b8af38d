"""
Global state broadcast to clients at the start of every round.
"""

from dataclasses import dataclass

import numpy as np

from proxyfed.model.core import ModelParams

SIMPLEX_TOLERANCE = 1e-12


@dataclass(frozen=True)
class GlobalState:
    """
    Global model (extractor theta_G and proxies Omega_G) plus the global prior P'_G.

    Replaced wholesale each round.
    """

    params: ModelParams
    prior: np.ndarray
    round: int = 0

    def __post_init__(self) -> None:
        prior = np.array(self.prior, dtype=np.float64, copy=True)
        if prior.shape != (self.params.num_classes,):
            raise ValueError(
                f"Prior has shape {prior.shape}, expected ({self.params.num_classes},)"
            )
        if np.any(prior < 0) or abs(prior.sum() - 1.0) > SIMPLEX_TOLERANCE:
            raise ValueError(f"Prior must be a simplex vector, got {prior}")
        prior.setflags(write=False)
        object.__setattr__(self, "prior", prior)

    @property
    def proxies(self) -> np.ndarray:
        return self.params.proxies

    @classmethod
    def initial(cls, params: ModelParams) -> "GlobalState":
        """Round-0 state: the given model and a uniform prior."""
        num_classes = params.num_classes
        return cls(params=params, prior=np.full(num_classes, 1.0 / num_classes), round=0)
