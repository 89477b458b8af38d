"""
Shared utilities for ProxyFed.

Provides common enums and the seeded RNG stream derivation used across the codebase.
"""

from enum import Enum, IntEnum

import numpy as np


class LowConfMode(str, Enum):
    """How a client treats low-confidence unlabeled samples."""

    DISCARD = "discard"  # drop them (FixMatch-style)
    DIRECT = "direct"  # argmax pseudo-labels into L_u
    ICPL = "icpl"  # indecisive-categories proxy learning


class XiRule(str, Enum):
    """Construction rule for a low-confidence sample's indecisive-categories set."""

    PRIOR = "prior"
    TOP1 = "top1"
    TOP5 = "top5"


class DistanceMetric(str, Enum):
    """Distance used by global proxy tuning."""

    SQUARED_EUCLIDEAN = "squared_euclidean"
    COSINE = "cosine"


class PseudoLabelSource(str, Enum):
    """Which model produces pseudo-labels during local training."""

    GLOBAL = "global"
    LOCAL = "local"


class SampleKind(IntEnum):
    """Label evidence carried by a batch row."""

    LABELED = 0
    HIGH_CONF = 1
    LOW_CONF = 2


class RngStream(IntEnum):
    """Independent RNG stream identifiers, mixed into every derived seed."""

    DATA = 0
    PARTITION = 1
    INIT = 2
    SAMPLING = 3
    CLIENT = 4


def derive_rng(master_seed: int, stream: RngStream, *keys: int) -> np.random.Generator:
    """
    Derive an independent generator from the master seed.

    The same (seed, stream, keys) always yields the same stream, whichever
    thread asks for it and in whatever order.

    Args:
        master_seed: The run's master seed (any 64-bit integer).
        stream: Stream identifier separating unrelated consumers.
        *keys: Further integers, e.g. round index and client id.

    Returns:
        A fresh numpy Generator.
    """
    entropy = [int(master_seed) & 0xFFFFFFFFFFFFFFFF, int(stream), *(int(k) for k in keys)]
    return np.random.default_rng(entropy)

