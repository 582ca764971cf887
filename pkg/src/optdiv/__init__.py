"""Finite-horizon optimal dividends with capital injections."""
__version__ = "0.1.0"
