"""Two-phase primal simplex on a dense tableau with implicit variable bounds.

Works on a plain array form of an LP:

    minimize c @ x + c0
    s.t.     A @ x (<=|=|>=) b     row senses -1 / 0 / +1
             lo <= x <= hi         entries may be +-inf

Slacks are appended internally (one per row) so every row becomes an
equality; artificial columns are added only for rows whose slack cannot
absorb the initial residual. The iteration loop lives in
:mod:`pmopt.kernels` (numba or numpy backend). Bland's rule engages after
``bland_after`` degenerate pivots.

Basic values reported by the tableau drift with pivot round-off, so
``refine=True`` re-solves the final basis against the original data with a
dense factorization; branch-and-bound refines incumbents only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import InvertedBounds, NumericalBreakdown

FEAS_TOL = 1e-7


@dataclass
class ArrayLP:
    """Dense LP data. Rows: A x (sense) b; senses -1 <=, 0 =, +1 >=."""

    A: np.ndarray
    sense: np.ndarray
    b: np.ndarray
    c: np.ndarray
    c0: float
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.asarray(self.A, dtype=float)
        if self.A.size == 0:
            self.A = np.zeros((0, self.c.shape[0]))
        self.A = np.atleast_2d(self.A)
        self.sense = np.asarray(self.sense, dtype=np.int8)
        self.b = np.asarray(self.b, dtype=float)
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        if np.any(self.lo > self.hi):
            raise InvertedBounds("lo > hi in LP data")

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]


@dataclass
class LpResult:
    status: str                    # optimal | infeasible | unbounded
    x: np.ndarray | None
    obj: float | None
    iters: int
    degenerate: int
    # internals for dual extraction / refinement
    basis: np.ndarray | None = None
    vstat: np.ndarray | None = None
    values: np.ndarray | None = None   # all-column values (struct+slack+art)
    art_rows: np.ndarray | None = None
    art_signs: np.ndarray | None = None
    phase1_infeasibility: float = 0.0

    @property
    def art_cols(self) -> int:
        return 0 if self.art_rows is None else len(self.art_rows)


def _slack_bounds(sense: np.ndarray):
    m = sense.shape[0]
    slo = np.zeros(m)
    shi = np.zeros(m)
    slo[sense == 1] = -np.inf
    shi[sense == -1] = np.inf
    return slo, shi


def _initial_status(lo: np.ndarray, hi: np.ndarray):
    """Nonbasic start: lower bound if finite, else upper, else free at 0."""
    n = lo.shape[0]
    vstat = np.full(n, 3, dtype=np.int8)
    vstat[np.isfinite(lo)] = 0
    vstat[~np.isfinite(lo) & np.isfinite(hi)] = 1
    vals = np.zeros(n)
    vals[vstat == 0] = lo[vstat == 0]
    vals[vstat == 1] = hi[vstat == 1]
    return vstat, vals


def _pivot_once(T, xB, basis, vstat, r, j, val_enter):
    """Degenerate (t=0) pivot used to drive artificials out of the basis."""
    piv = T[r, j]
    T[r, :] /= piv
    col = T[:, j].copy()
    col[r] = 0.0
    T -= col[:, None] * T[r, :][None, :]
    vstat[basis[r]] = 0
    basis[r] = j
    vstat[j] = 2
    xB[r] = val_enter


def _column_values(xB, basis, vstat, lo_all, hi_all):
    vals = np.zeros(vstat.shape[0])
    at_lo = vstat == 0
    at_hi = vstat == 1
    vals[at_lo] = lo_all[at_lo]
    vals[at_hi] = hi_all[at_hi]
    vals[basis] = xB
    return vals


def _ext_columns(pr: ArrayLP, res: LpResult) -> np.ndarray:
    """Original (un-pivoted) columns: structural, slack identity, artificials."""
    m, n = pr.m, pr.n
    A_ext = np.zeros((m, n + m + res.art_cols))
    A_ext[:, :n] = pr.A
    A_ext[:, n:n + m] = np.eye(m)
    if res.art_cols:
        for a, (i, sg) in enumerate(zip(res.art_rows, res.art_signs)):
            A_ext[i, n + m + a] = sg
    return A_ext


def solve_arrays(pr: ArrayLP, bland_after: int = 1000, refine: bool = False,
                 max_iter: int | None = None, dj_tol: float = 1e-9,
                 tie_tol: float = 1e-9) -> LpResult:
    """Two-phase simplex over the array form. Raises NumericalBreakdown when
    no acceptable pivot persists or the iteration cap is hit."""
    m, n = pr.m, pr.n
    if m == 0:
        return _solve_unconstrained(pr)

    slo, shi = _slack_bounds(pr.sense)
    svstat, svals = _initial_status(pr.lo, pr.hi)
    resid = pr.b - pr.A @ svals

    # rows whose slack cannot absorb the initial residual get an artificial
    art_rows = []
    art_signs = []
    slack_stat = np.full(m, 2, dtype=np.int8)   # basic by default
    slack_val = resid.copy()
    art_val = []
    for i in range(m):
        if slo[i] - 1e-12 <= resid[i] <= shi[i] + 1e-12:
            slack_val[i] = min(max(resid[i], slo[i]), shi[i])
            continue
        sb = shi[i] if resid[i] > shi[i] else slo[i]
        slack_stat[i] = 0 if sb == slo[i] else 1
        slack_val[i] = sb
        sg = 1.0 if resid[i] - sb > 0 else -1.0
        art_rows.append(i)
        art_signs.append(sg)
        art_val.append(sg * (resid[i] - sb))

    n_art = len(art_rows)
    ntot = n + m + n_art
    T = np.zeros((m, ntot))
    T[:, :n] = pr.A
    T[:, n:n + m] = np.eye(m)
    lo_all = np.concatenate([pr.lo, slo, np.zeros(n_art)])
    hi_all = np.concatenate([pr.hi, shi, np.full(n_art, np.inf)])
    vstat = np.concatenate([svstat, slack_stat,
                            np.full(n_art, 2, dtype=np.int8)]).astype(np.int8)
    basis = np.arange(n, n + m, dtype=np.int64)
    xB = slack_val.copy()
    for a, (i, sg) in enumerate(zip(art_rows, art_signs)):
        if sg < 0:
            T[i, :] *= -1.0          # B^{-1} row for a -1 basis column
        T[i, n + m + a] = 1.0
        basis[i] = n + m + a
        xB[i] = art_val[a]

    if max_iter is None:
        max_iter = 20000 + 80 * (m + ntot)
    total_iters = 0
    degen = 0

    if n_art:
        d1 = np.zeros(ntot)
        d1[n + m:] = 1.0
        for i in art_rows:
            d1 -= T[i, :]
        d1[basis] = 0.0
        obj1 = float(xB[np.asarray(art_rows)].sum())
        code, obj1, it1, degen = kernels.lp_phase(
            T, xB, d1, basis, vstat, lo_all, hi_all, obj1,
            bland_after, degen, max_iter, dj_tol, tie_tol)
        total_iters += it1
        if code in (kernels.BREAKDOWN, kernels.ITER_LIMIT):
            raise NumericalBreakdown(f"phase 1 stalled (code {code})")
        feas_tol = FEAS_TOL * (1.0 + float(np.abs(pr.b).max(initial=0.0)))
        if obj1 > feas_tol:
            return LpResult("infeasible", None, None, total_iters, degen,
                            phase1_infeasibility=float(obj1))
        # drive artificials out of the basis where possible
        for i in range(m):
            if basis[i] < n + m:
                continue
            xB[i] = 0.0
            row = np.abs(T[i, :n + m])
            row[vstat[:n + m] == 2] = 0.0
            j = int(np.argmax(row))
            if row[j] > 1e-8:
                s_in = vstat[j]
                val = lo_all[j] if s_in == 0 else (hi_all[j] if s_in == 1 else 0.0)
                _pivot_once(T, xB, basis, vstat, i, j, val)
        # freeze artificial columns for phase 2
        lo_all[n + m:] = 0.0
        hi_all[n + m:] = 0.0

    c_all = np.concatenate([pr.c, np.zeros(m + n_art)])
    d2 = c_all - c_all[basis] @ T
    d2[basis] = 0.0
    vals = _column_values(xB, basis, vstat, lo_all, hi_all)
    obj2 = float(c_all @ vals)
    code, obj2, it2, degen = kernels.lp_phase(
        T, xB, d2, basis, vstat, lo_all, hi_all, obj2,
        bland_after, degen, max_iter, dj_tol, tie_tol)
    total_iters += it2
    if code in (kernels.BREAKDOWN, kernels.ITER_LIMIT):
        raise NumericalBreakdown(f"phase 2 stalled (code {code})")
    if code == kernels.UNBOUNDED:
        return LpResult("unbounded", None, None, total_iters, degen)

    vals = _column_values(xB, basis, vstat, lo_all, hi_all)
    res = LpResult("optimal", vals[:n].copy(), float(c_all @ vals + pr.c0),
                   total_iters, degen, basis=basis.copy(), vstat=vstat.copy(),
                   values=vals,
                   art_rows=np.asarray(art_rows, dtype=np.int64),
                   art_signs=np.asarray(art_signs))
    if refine:
        refine_result(pr, res)
    return res


def refine_result(pr: ArrayLP, res: LpResult) -> None:
    """Re-solve the final basis against original data for clean values."""
    if res.status != "optimal" or res.basis is None or res.basis.size == 0:
        return
    m, n = pr.m, pr.n
    A_ext = _ext_columns(pr, res)
    vals = res.values.copy()
    nb = np.ones(vals.shape[0], dtype=bool)
    nb[res.basis] = False
    rhs = pr.b - A_ext[:, nb] @ vals[nb]
    B = A_ext[:, res.basis]
    try:
        xb = np.linalg.solve(B, rhs)
    except np.linalg.LinAlgError:
        return
    vals[res.basis] = xb
    res.values = vals
    res.x = vals[:n].copy()
    c_all = np.concatenate([pr.c, np.zeros(m + res.art_cols)])
    res.obj = float(c_all @ vals + pr.c0)


def compute_duals(pr: ArrayLP, res: LpResult):
    """Row duals y and reduced costs for an optimal result.

    The identity c@x + c0 = y@b + sum_{nonbasic j} redcost_j * value_j + c0
    holds up to round-off; ``duality_residual`` measures the gap.
    """
    if res.status != "optimal":
        raise ValueError("duals only exist for optimal results")
    if res.basis is None or res.basis.size == 0:
        return np.zeros(pr.m), pr.c.copy()
    A_ext = _ext_columns(pr, res)
    c_all = np.concatenate([pr.c, np.zeros(pr.m + res.art_cols)])
    B = A_ext[:, res.basis]
    y = np.linalg.solve(B.T, c_all[res.basis])
    red = c_all - y @ A_ext
    return y, red


def duality_residual(pr: ArrayLP, res: LpResult) -> float:
    """|primal - dual| objective residual; tiny for a consistent optimum."""
    y, red = compute_duals(pr, res)
    vals = res.values
    nb = np.ones(vals.shape[0], dtype=bool)
    if res.basis is not None and res.basis.size:
        nb[res.basis] = False
    dual_obj = float(y @ pr.b + red[nb] @ vals[nb] + pr.c0)
    return abs(res.obj - dual_obj)


def _solve_unconstrained(pr: ArrayLP) -> LpResult:
    x = np.zeros(pr.n)
    for j in range(pr.n):
        if pr.c[j] > 0:
            x[j] = pr.lo[j]
        elif pr.c[j] < 0:
            x[j] = pr.hi[j]
        elif np.isfinite(pr.lo[j]):
            x[j] = pr.lo[j]
        elif np.isfinite(pr.hi[j]):
            x[j] = pr.hi[j]
        if not np.isfinite(x[j]):
            return LpResult("unbounded", None, None, 0, 0)
    return LpResult("optimal", x, float(pr.c @ x + pr.c0), 0, 0,
                    basis=np.empty(0, dtype=np.int64),
                    vstat=np.zeros(pr.n, dtype=np.int8), values=x.copy(),
                    art_rows=np.empty(0, dtype=np.int64),
                    art_signs=np.empty(0))
