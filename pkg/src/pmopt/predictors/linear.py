"""Ordinary least squares with a ridge fallback for rank-deficient designs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import linalg
from ..errors import DimensionMismatch, NotSPD
from .data import Dataset

RIDGE_FALLBACK = 1e-8


@dataclass(frozen=True)
class LinearModel:
    intercept: float
    coef: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coef", np.asarray(self.coef, dtype=float))

    @property
    def n_features(self) -> int:
        return self.coef.shape[0]

    def predict(self, X) -> np.ndarray | float:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            if X.shape[0] != self.n_features:
                raise DimensionMismatch(
                    f"expected {self.n_features} features, got {X.shape[0]}")
            return float(self.intercept + X @ self.coef)
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(
                f"expected {self.n_features} features, got {X.shape[1]}")
        return self.intercept + X @ self.coef


def fit_ols(train: Dataset) -> LinearModel:
    """Least squares via the normal equations; a tiny ridge penalty covers
    rank-deficient designs so the fit never fails."""
    q, n = train.X.shape
    Xd = np.hstack([np.ones((q, 1)), train.X])
    G = Xd.T @ Xd
    rhs = Xd.T @ train.y
    try:
        beta = linalg.solve_spd(G, rhs)
    except NotSPD:
        beta = linalg.solve_spd(G + RIDGE_FALLBACK * np.eye(n + 1), rhs)
    return LinearModel(float(beta[0]), beta[1:])
