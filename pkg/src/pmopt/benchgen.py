"""Synthetic benchmark instances: sample around a known global minimum, add
noise, scale, drop the worst tail, and split.

Two nonnegative test functions with known minima at value zero drive the
study; the sample mean sits at a global minimum so the interesting region is
inside the cloud, and the top slice of true values is dropped before
training, mirroring a practitioner discarding obviously bad records.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch
from .linalg import cholesky, random_spd
from .predictors import Dataset, MinMaxScaler, split_train_test


class OutOfBoxWarning(UserWarning):
    """Evaluation requested outside the scaled unit box."""


def eval_powell(x) -> np.ndarray | float:
    """(x1+10x2)^2 + 5(x3-x4)^2 + (x2-2x3)^4 + 10(x1-x4)^4, minimum 0 at 0."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != 4:
        raise DimensionMismatch("powell needs 4 coordinates")
    v = ((X[:, 0] + 10.0 * X[:, 1]) ** 2
         + 5.0 * (X[:, 2] - X[:, 3]) ** 2
         + (X[:, 1] - 2.0 * X[:, 2]) ** 4
         + 10.0 * (X[:, 0] - X[:, 3]) ** 4)
    return float(v[0]) if single else v


def eval_quintic(x) -> np.ndarray | float:
    """sum_i |x_i^5 - 3x_i^4 + 4x_i^3 + 2x_i^2 - 10x_i - 4|, zero at -1 and 2."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != 5:
        raise DimensionMismatch("quintic needs 5 coordinates")
    p = (X ** 5 - 3.0 * X ** 4 + 4.0 * X ** 3 + 2.0 * X ** 2 - 10.0 * X - 4.0)
    v = np.abs(p).sum(axis=1)
    return float(v[0]) if single else v


@dataclass(frozen=True)
class BenchmarkFunction:
    name: str
    dim: int
    minima: tuple          # known global minimum locations, value 0
    sample_mean: tuple     # which minimum the sampling cloud centers on

    def __call__(self, x):
        return _EVALS[self.name](x)


_EVALS = {"powell": eval_powell, "quintic": eval_quintic}

FUNCTIONS = {
    "powell": BenchmarkFunction("powell", 4, ((0.0, 0.0, 0.0, 0.0),),
                                (0.0, 0.0, 0.0, 0.0)),
    "quintic": BenchmarkFunction("quintic", 5,
                                 ((-1.0,) * 5, (2.0,) * 5), (2.0,) * 5),
}


@dataclass(frozen=True)
class NoiseSpec:
    kind: str          # constant | nonconstant
    value: float       # delta for constant, beta for nonconstant

    def __post_init__(self):
        if self.kind not in ("constant", "nonconstant"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.value < 0 or (self.kind == "nonconstant" and self.value <= 0):
            raise ValueError("noise parameter must be positive")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "value": self.value}

    @staticmethod
    def from_dict(d: dict) -> "NoiseSpec":
        return NoiseSpec(d["kind"], float(d["value"]))


def sample_mvn(mu, cov, count: int, rng: np.random.Generator) -> np.ndarray:
    """x = mu + L u with L the Cholesky factor and u standard normal."""
    mu = np.asarray(mu, dtype=float)
    L = cholesky(cov)
    u = rng.standard_normal((count, mu.shape[0]))
    return mu[None, :] + u @ L.T


def apply_noise(truths, spec: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    """Gaussian noise per point: std = delta * max(truths) for constant,
    std = truth / beta otherwise (zero variance right at a minimum)."""
    truths = np.asarray(truths, dtype=float)
    if spec.kind == "constant":
        sigma = spec.value * float(truths.max())
        return truths + rng.normal(0.0, 1.0, truths.shape[0]) * sigma
    sigma = truths / spec.value
    return truths + rng.normal(0.0, 1.0, truths.shape[0]) * sigma


@dataclass(frozen=True)
class GeneratedInstance:
    function: BenchmarkFunction
    noise: NoiseSpec
    seed: int
    n_samples: int
    drop_fraction: float
    split_ratio: float
    covariance: np.ndarray
    raw: np.ndarray          # (n_samples, n) raw units
    truths: np.ndarray
    targets: np.ndarray      # noisy
    scaler: MinMaxScaler
    keep_idx: np.ndarray     # post-drop rows (into raw)
    train_rows: np.ndarray   # rows into keep_idx order
    test_rows: np.ndarray

    @property
    def instance_id(self) -> str:
        return (f"{self.function.name}-{self.noise.kind}"
                f"-{self.noise.value:g}-s{self.seed}")

    @property
    def postdrop(self) -> Dataset:
        X = self.scaler.transform(self.raw[self.keep_idx])
        return Dataset(X, self.targets[self.keep_idx])

    @property
    def postdrop_truths(self) -> np.ndarray:
        return self.truths[self.keep_idx]

    @property
    def train(self) -> Dataset:
        return self.postdrop.take(self.train_rows)

    @property
    def test(self) -> Dataset:
        return self.postdrop.take(self.test_rows)


def generate_instance(function: str | BenchmarkFunction, noise: NoiseSpec,
                      seed: int, n_samples: int = 1000,
                      drop_fraction: float = 0.1,
                      split_ratio: float = 0.7) -> GeneratedInstance:
    """Sample -> truths -> noisy targets -> scale -> drop worst -> split.

    The scaler fits on all sampled rows before the drop; the drop removes
    the rows with the highest true values (never the best row)."""
    fn = FUNCTIONS[function] if isinstance(function, str) else function
    rng = np.random.default_rng(seed)
    cov = random_spd(fn.dim, rng)
    raw = sample_mvn(np.asarray(fn.sample_mean), cov, n_samples, rng)
    truths = fn(raw)
    targets = apply_noise(truths, noise, rng)
    scaler = MinMaxScaler.fit(raw)
    n_drop = int(round(drop_fraction * n_samples))
    order = np.argsort(truths, kind="stable")
    keep_idx = np.sort(order[:n_samples - n_drop])
    q_keep = keep_idx.shape[0]
    n_train = int(np.ceil(split_ratio * q_keep))
    perm = rng.permutation(q_keep)
    train_rows = np.sort(perm[:n_train])
    test_rows = np.sort(perm[n_train:])
    return GeneratedInstance(fn, noise, seed, n_samples, drop_fraction,
                             split_ratio, cov, raw, truths, targets, scaler,
                             keep_idx, train_rows, test_rows)


def true_value(inst: GeneratedInstance, x_scaled) -> float:
    """Noise-free objective at a scaled point (inverse-scaled first)."""
    x_scaled = np.asarray(x_scaled, dtype=float)
    if np.any(x_scaled < -1e-9) or np.any(x_scaled > 1 + 1e-9):
        warnings.warn("point lies outside the scaled unit box",
                      OutOfBoxWarning, stacklevel=2)
    return float(inst.function(inst.scaler.inverse(x_scaled)))


# -- persistence ----------------------------------------------------------------

def save_instance(inst: GeneratedInstance, out_dir, stem: str | None = None):
    """Write <stem>.csv (raw features, truth, target, role) and a JSON
    sidecar with everything needed to rebuild the instance exactly."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = stem or inst.instance_id
    n = inst.function.dim
    role = np.full(inst.n_samples, "dropped", dtype=object)
    role[inst.keep_idx[inst.train_rows]] = "train"
    role[inst.keep_idx[inst.test_rows]] = "test"
    csv_path = out / f"{stem}.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(n)] + ["true_value", "target", "role"])
        for r in range(inst.n_samples):
            w.writerow([repr(v) for v in inst.raw[r]]
                       + [repr(inst.truths[r]), repr(inst.targets[r]), role[r]])
    sidecar = {
        "format_version": 1,
        "function": inst.function.name,
        "noise": inst.noise.to_dict(),
        "seed": inst.seed,
        "n_samples": inst.n_samples,
        "drop_fraction": inst.drop_fraction,
        "split_ratio": inst.split_ratio,
        "covariance": inst.covariance.tolist(),
        "scaler": inst.scaler.to_dict(),
    }
    json_path = out / f"{stem}.json"
    with open(json_path, "w") as fh:
        json.dump(sidecar, fh, indent=1)
        fh.write("\n")
    return csv_path, json_path


def load_instance(csv_path) -> GeneratedInstance:
    csv_path = Path(csv_path)
    with open(csv_path.with_suffix(".json")) as fh:
        side = json.load(fh)
    fn = FUNCTIONS[side["function"]]
    rows = []
    with open(csv_path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        for row in rd:
            rows.append(row)
    n = fn.dim
    raw = np.array([[float(v) for v in r[:n]] for r in rows])
    truths = np.array([float(r[n]) for r in rows])
    targets = np.array([float(r[n + 1]) for r in rows])
    roles = np.array([r[n + 2] for r in rows])
    keep_idx = np.nonzero(roles != "dropped")[0]
    kept_roles = roles[keep_idx]
    train_rows = np.nonzero(kept_roles == "train")[0]
    test_rows = np.nonzero(kept_roles == "test")[0]
    return GeneratedInstance(
        fn, NoiseSpec.from_dict(side["noise"]), int(side["seed"]),
        int(side["n_samples"]), float(side["drop_fraction"]),
        float(side["split_ratio"]), np.asarray(side["covariance"], dtype=float),
        raw, truths, targets, MinMaxScaler.from_dict(side["scaler"]),
        keep_idx, train_rows, test_rows)
