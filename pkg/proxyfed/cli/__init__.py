"""
ProxyFed CLI application.

Provides commands for:
- version: Show the installed version
- run: Run one experiment and write metrics.csv / summary.json
- sweep: Run a grid of experiments over seeds and write sweep_summary.csv
- gradcheck: Finite-difference check of every loss gradient
"""

from . import sweep as _sweep  # noqa: F401  (registers the sweep command)
from .main import app


def main() -> None:
    """CLI entry point."""
    app()


if __name__ == "__main__":
    main()
