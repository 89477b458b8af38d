"""Version information for ProxyFed."""

__version__ = "0.1.0"
