"""
ProxyFed - a deterministic desk-scale simulator for proxy-guided federated
semi-supervised learning.

ProxyFed provides:
- Synthetic Gaussian-blob datasets with Dirichlet client partitions
- A small MLP + proxy classifier with exact analytic gradients
- Client-side indecisive-categories proxy learning
- Server-side global proxy tuning and cost accounting
- A seeded, parallel round orchestrator with CSV / JSON metrics
"""

from proxyfed.version import __version__

__all__ = ["__version__"]
