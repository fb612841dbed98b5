"""Dense linear algebra for covariance handling, sampling, and solver support.

All operations are pure and act on plain numpy arrays (row-major). Matrices
here stay small (n <= ~12 features), so an unblocked Cholesky with an explicit
pivot tolerance is preferred over a library call: the NotSPD contract depends
on the pivot threshold, not on a backend-specific exception.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, NotSPD

PIVOT_TOL = 1e-12
SYMMETRY_TOL = 1e-10


def _as_square(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    return a


def cholesky(spd) -> np.ndarray:
    """Lower-triangular L with L @ L.T equal to the input.

    Raises NotSPD when the input is asymmetric beyond 1e-10 or a pivot
    falls at or below 1e-12.
    """
    a = _as_square(spd)
    if not np.all(np.isfinite(a)):
        raise NotSPD("matrix has non-finite entries")
    if np.max(np.abs(a - a.T), initial=0.0) > SYMMETRY_TOL:
        raise NotSPD("matrix is not symmetric within 1e-10")
    n = a.shape[0]
    L = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1):
            acc = a[i, j] - L[i, :j] @ L[j, :j]
            if i == j:
                if acc <= PIVOT_TOL:
                    raise NotSPD(f"pivot {acc:.3e} at index {i}")
                L[i, i] = np.sqrt(acc)
            else:
                L[i, j] = acc / L[j, j]
    return L


def solve_lower(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Forward substitution for lower-triangular L."""
    n = L.shape[0]
    y = np.array(b, dtype=float, copy=True)
    for i in range(n):
        y[i] = (y[i] - L[i, :i] @ y[:i]) / L[i, i]
    return y


def solve_spd(spd: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve (SPD) @ x = b via Cholesky."""
    L = cholesky(spd)
    y = solve_lower(L, b)
    n = L.shape[0]
    x = y
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - L[i + 1:, i] @ x[i + 1:]) / L[i, i]
    return x


def spd_inverse(spd) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix.

    Propagates NotSPD from the factorization. The product with the input
    matches the identity within 1e-8 at the scales used here.
    """
    a = _as_square(spd)
    L = cholesky(a)
    n = a.shape[0]
    inv = np.empty((n, n))
    eye = np.eye(n)
    for k in range(n):
        y = solve_lower(L, eye[:, k])
        for i in range(n - 1, -1, -1):
            y[i] = (y[i] - L[i + 1:, i] @ y[i + 1:]) / L[i, i]
        inv[:, k] = y
    # symmetrize to kill round-off skew
    return 0.5 * (inv + inv.T)


def random_spd(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random SPD matrix Q @ diag(d) @ Q.T with spectrum in [1, 2].

    Q comes from the QR factorization of a standard-normal matrix with the
    sign convention diag(R) > 0, so the draw is a deterministic function of
    the generator state.
    """
    if n < 1:
        raise DimensionMismatch("dimension must be >= 1")
    g = rng.standard_normal((n, n))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diag(r))
    d = rng.uniform(1.0, 2.0, size=n)
    m = (q * d) @ q.T
    return 0.5 * (m + m.T)


def quadratic_form(x, mu, cinv) -> float:
    """Squared covariance-scaled distance (x - mu)^T cinv (x - mu)."""
    xv = np.asarray(x, dtype=float).ravel()
    mv = np.asarray(mu, dtype=float).ravel()
    ci = _as_square(cinv)
    if xv.shape[0] != mv.shape[0] or xv.shape[0] != ci.shape[0]:
        raise DimensionMismatch(
            f"x has {xv.shape[0]} entries, mu has {mv.shape[0]}, "
            f"matrix is {ci.shape[0]}x{ci.shape[1]}"
        )
    diff = xv - mv
    val = float(diff @ ci @ diff)
    # round-off can push the form a hair below zero at x == mu
    return max(val, 0.0)
