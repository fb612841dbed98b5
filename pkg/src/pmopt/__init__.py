"""Optimization over trained predictors with training-relevance constraints."""

__version__ = "0.1.0"
