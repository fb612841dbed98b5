"""Datasets, min-max scaling, splits, and fit metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConstantTruth, DegenerateFeature, DimensionMismatch, TooFewRows


@dataclass(frozen=True)
class Dataset:
    """Feature matrix (q, n) with a target vector (q,); immutable."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).ravel()
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if X.ndim != 2:
            raise DimensionMismatch("features must be a 2-D matrix")
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatch(
                f"{X.shape[0]} feature rows vs {y.shape[0]} targets")
        if X.shape[0] < 2:
            raise TooFewRows("need at least 2 rows")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DimensionMismatch("non-finite entries in dataset")

    @property
    def q(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    def take(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx])


class MinMaxScaler:
    """Per-feature affine map onto [0, 1]; strictly increasing per feature."""

    def __init__(self, mins: np.ndarray, maxs: np.ndarray):
        self.mins = np.asarray(mins, dtype=float)
        self.maxs = np.asarray(maxs, dtype=float)
        if np.any(self.maxs <= self.mins):
            bad = int(np.argmax(self.maxs <= self.mins))
            raise DegenerateFeature(f"feature {bad} is constant")

    @classmethod
    def fit(cls, X: np.ndarray) -> "MinMaxScaler":
        X = np.asarray(X, dtype=float)
        return cls(X.min(axis=0), X.max(axis=0))

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mins) / (self.maxs - self.mins)

    def inverse(self, Xs: np.ndarray) -> np.ndarray:
        return np.asarray(Xs, dtype=float) * (self.maxs - self.mins) + self.mins

    def to_dict(self) -> dict:
        return {"min": self.mins.tolist(), "max": self.maxs.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "MinMaxScaler":
        return cls(np.asarray(d["min"]), np.asarray(d["max"]))


def minmax_fit_transform(raw: Dataset):
    """Scale features to [0, 1]; returns the scaled dataset and the scaler."""
    scaler = MinMaxScaler.fit(raw.X)
    return Dataset(scaler.transform(raw.X), raw.y), scaler


def split_train_test(d: Dataset, ratio: float, rng: np.random.Generator):
    """Random split into ceil(ratio*q) train rows and the rest for test."""
    if d.q < 10:
        raise TooFewRows(f"need at least 10 rows to split, got {d.q}")
    n_train = int(np.ceil(ratio * d.q))
    perm = rng.permutation(d.q)
    tr = np.sort(perm[:n_train])
    te = np.sort(perm[n_train:])
    return d.take(tr), d.take(te)


def r2_score(pred, truth) -> float:
    """Coefficient of determination 1 - SS_res / SS_tot."""
    p = np.asarray(pred, dtype=float).ravel()
    t = np.asarray(truth, dtype=float).ravel()
    if p.shape[0] != t.shape[0]:
        raise DimensionMismatch("prediction/truth length mismatch")
    if p.shape[0] < 2:
        raise DimensionMismatch("need at least 2 points")
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    if ss_tot <= 0.0:
        raise ConstantTruth("R^2 undefined for constant truth")
    ss_res = float(np.sum((t - p) ** 2))
    return 1.0 - ss_res / ss_tot
