"""Recurrent text classifiers with interpretable aggregation and baselines."""

__version__ = "0.1.0"
