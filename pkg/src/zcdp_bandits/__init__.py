"""Bandit policies under zero-concentrated differential privacy, with exact privacy audits."""

__version__ = "0.1.0"
