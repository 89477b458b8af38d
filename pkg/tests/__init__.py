"""ProxyFed test suite."""
