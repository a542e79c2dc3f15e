"""Federated fitting of tabular preprocessing from aggregated statistics and sketches."""

__version__ = "0.1.0"
