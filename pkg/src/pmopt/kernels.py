"""Hot numeric kernels with numba acceleration and a pure-numpy fallback.

The two kernels that dominate runtime are the bounded-variable simplex
iteration loop (called thousands of times per branch-and-bound solve) and
batch tree routing (called per prediction during forest training and search).
Both exist in two semantically identical flavors:

* ``*_numba`` -- explicit loops compiled with ``@njit(cache=True)``; and
* ``*_numpy`` -- vectorized numpy with the same pivot/tie-break rules.

Set ``PMOPT_DISABLE_NUMBA=1`` (or install without numba) to select the numpy
path; ``BACKEND`` records which one is active. ``benchmarks/bench_kernels.py``
times the two paths against each other.

Simplex phase contract
----------------------
``lp_phase(T, xB, d, basis, vstat, lo, hi, obj, bland_after, degen, max_iter)``
runs primal simplex iterations on a dense tableau until the phase objective
(minimization) is optimal. Column status codes in ``vstat``: 0 nonbasic at
lower bound, 1 nonbasic at upper bound, 2 basic, 3 nonbasic free at value 0.
Mutates ``T, xB, d, basis, vstat`` in place and returns
``(code, obj, iters, degen)`` with code 0 optimal, 1 unbounded,
2 iteration cap, 3 numerical breakdown.

Rules (fixed for reproducibility, identical in both backends):

* entering: largest reduced-cost violation, ties to the lowest column index;
  after ``bland_after`` degenerate pivots, lowest eligible column index;
* ratio test: minimum ratio; among rows within 1e-9 of the minimum, largest
  absolute pivot (lowest basis index under Bland), lowest row index on ties;
* a bound flip is preferred when it ties the minimum ratio.
"""

from __future__ import annotations

import math
import os

import numpy as np

_EPS_PIV = 1e-11      # entries smaller than this are treated as zero rays
_DJ_TOL = 1e-9        # default reduced-cost optimality tolerance
_TIE_TOL = 1e-9       # default ratio-test tie window
_DEGEN_T = 1e-10      # step sizes below this count as degenerate
_TINY_PIV = 1e-9      # pivots below this feed the breakdown counter
_TINY_RUN = 30        # consecutive tiny pivots before breakdown

OPTIMAL, UNBOUNDED, ITER_LIMIT, BREAKDOWN = 0, 1, 2, 3


def _lp_phase_py(T, xB, d, basis, vstat, lo, hi, obj, bland_after, degen,
                 max_iter, dj_tol, tie_tol):
    m, ntot = T.shape
    iters = 0
    tiny = 0
    while iters < max_iter:
        bland = degen >= bland_after
        # ---- entering column -------------------------------------------
        jbest = -1
        dirbest = 1
        score = dj_tol
        for j in range(ntot):
            s = vstat[j]
            if s == 2 or lo[j] == hi[j]:
                continue
            dj = d[j]
            if (s == 0 or s == 3) and -dj > score:
                jbest = j
                dirbest = 1
                score = -dj
            if (s == 1 or s == 3) and dj > score:
                jbest = j
                dirbest = -1
                score = dj
            if bland and jbest >= 0:
                break
        if jbest < 0:
            return OPTIMAL, obj, iters, degen

        s_in = vstat[jbest]
        if s_in == 0:
            val_enter = lo[jbest]
        elif s_in == 1:
            val_enter = hi[jbest]
        else:
            val_enter = 0.0
        tflip = math.inf
        if s_in != 3 and math.isfinite(hi[jbest]) and math.isfinite(lo[jbest]):
            tflip = hi[jbest] - lo[jbest]

        # ---- ratio test, pass 1: minimum ratio --------------------------
        tmin = math.inf
        for i in range(m):
            a = dirbest * T[i, jbest]
            k = basis[i]
            if a > _EPS_PIV:
                bnd = lo[k]
                if bnd == -math.inf:
                    continue
                ratio = (xB[i] - bnd) / a
            elif a < -_EPS_PIV:
                bnd = hi[k]
                if bnd == math.inf:
                    continue
                ratio = (xB[i] - bnd) / a
            else:
                continue
            if ratio < 0.0:
                ratio = 0.0
            if ratio < tmin:
                tmin = ratio

        if tmin == math.inf and tflip == math.inf:
            return UNBOUNDED, obj, iters, degen

        if tflip <= tmin:
            # bound flip: no basis change
            t = tflip
            for i in range(m):
                xB[i] -= dirbest * t * T[i, jbest]
            obj += d[jbest] * dirbest * t
            vstat[jbest] = 1 - s_in
            iters += 1
            continue

        # ---- ratio test, pass 2: leaving row among ties ------------------
        r = -1
        best_piv = -1.0
        best_bas = -1
        for i in range(m):
            a = dirbest * T[i, jbest]
            k = basis[i]
            if a > _EPS_PIV:
                bnd = lo[k]
                if bnd == -math.inf:
                    continue
                ratio = (xB[i] - bnd) / a
            elif a < -_EPS_PIV:
                bnd = hi[k]
                if bnd == math.inf:
                    continue
                ratio = (xB[i] - bnd) / a
            else:
                continue
            if ratio < 0.0:
                ratio = 0.0
            if ratio > tmin + tie_tol:
                continue
            if bland:
                if r < 0 or k < best_bas:
                    r = i
                    best_bas = k
            else:
                ac = abs(T[i, jbest])
                if ac > best_piv:
                    r = i
                    best_piv = ac

        t = tmin
        piv = T[r, jbest]
        if abs(piv) < _TINY_PIV:
            tiny += 1
            if tiny > _TINY_RUN:
                return BREAKDOWN, obj, iters, degen
        else:
            tiny = 0
        if t < _DEGEN_T:
            degen += 1

        for i in range(m):
            xB[i] -= dirbest * t * T[i, jbest]
        xB[r] = val_enter + dirbest * t
        kleave = basis[r]
        vstat[kleave] = 0 if dirbest * piv > 0 else 1

        inv = 1.0 / piv
        for jj in range(ntot):
            T[r, jj] *= inv
        for i in range(m):
            if i == r:
                continue
            f = T[i, jbest]
            if f != 0.0:
                for jj in range(ntot):
                    T[i, jj] -= f * T[r, jj]
        djv = d[jbest]
        obj += djv * dirbest * t
        for jj in range(ntot):
            d[jj] -= djv * T[r, jj]
        d[jbest] = 0.0
        basis[r] = jbest
        vstat[jbest] = 2
        iters += 1
    return ITER_LIMIT, obj, iters, degen


def lp_phase_numpy(T, xB, d, basis, vstat, lo, hi, obj, bland_after, degen,
                   max_iter, dj_tol=_DJ_TOL, tie_tol=_TIE_TOL):
    """Vectorized twin of the loop kernel; identical selection rules."""
    m, ntot = T.shape
    iters = 0
    tiny = 0
    col_idx = np.arange(ntot)
    while iters < max_iter:
        bland = degen >= bland_after
        free_col = lo != hi
        nb = (vstat != 2) & free_col
        up_ok = nb & ((vstat == 0) | (vstat == 3))
        dn_ok = nb & ((vstat == 1) | (vstat == 3))
        score_up = np.where(up_ok, -d, -np.inf)
        score_dn = np.where(dn_ok, d, -np.inf)
        if bland:
            elig = (score_up > dj_tol) | (score_dn > dj_tol)
            if not elig.any():
                return OPTIMAL, obj, iters, degen
            jbest = int(col_idx[elig][0])
            dirbest = 1 if score_up[jbest] > dj_tol else -1
        else:
            score = np.maximum(score_up, score_dn)
            jbest = int(np.argmax(score))
            if score[jbest] <= dj_tol:
                return OPTIMAL, obj, iters, degen
            dirbest = 1 if score_up[jbest] >= score_dn[jbest] else -1

        s_in = int(vstat[jbest])
        if s_in == 0:
            val_enter = lo[jbest]
        elif s_in == 1:
            val_enter = hi[jbest]
        else:
            val_enter = 0.0
        tflip = np.inf
        if s_in != 3 and np.isfinite(hi[jbest]) and np.isfinite(lo[jbest]):
            tflip = hi[jbest] - lo[jbest]

        a = dirbest * T[:, jbest]
        blo = lo[basis]
        bhi = hi[basis]
        pos = (a > _EPS_PIV) & np.isfinite(blo)
        neg = (a < -_EPS_PIV) & np.isfinite(bhi)
        ratios = np.full(m, np.inf)
        ratios[pos] = (xB[pos] - blo[pos]) / a[pos]
        ratios[neg] = (xB[neg] - bhi[neg]) / a[neg]
        np.maximum(ratios, 0.0, out=ratios)
        tmin = ratios.min() if m else np.inf

        if tmin == np.inf and tflip == np.inf:
            return UNBOUNDED, obj, iters, degen

        if tflip <= tmin:
            t = tflip
            xB -= dirbest * t * T[:, jbest]
            obj += d[jbest] * dirbest * t
            vstat[jbest] = 1 - s_in
            iters += 1
            continue

        tie = ratios <= tmin + tie_tol
        rows = np.nonzero(tie)[0]
        if bland:
            r = int(rows[np.argmin(basis[rows])])
        else:
            r = int(rows[np.argmax(np.abs(T[rows, jbest]))])

        t = tmin
        piv = T[r, jbest]
        if abs(piv) < _TINY_PIV:
            tiny += 1
            if tiny > _TINY_RUN:
                return BREAKDOWN, obj, iters, degen
        else:
            tiny = 0
        if t < _DEGEN_T:
            degen += 1

        xB -= dirbest * t * T[:, jbest]
        xB[r] = val_enter + dirbest * t
        kleave = basis[r]
        vstat[kleave] = 0 if dirbest * piv > 0 else 1

        T[r, :] /= piv
        colf = T[:, jbest].copy()
        colf[r] = 0.0
        T -= colf[:, None] * T[r, :][None, :]
        djv = d[jbest]
        obj += djv * dirbest * t
        d -= djv * T[r, :]
        d[jbest] = 0.0
        basis[r] = jbest
        vstat[jbest] = 2
        iters += 1
    return ITER_LIMIT, obj, iters, degen


def _route_leaf_ids_py(feature, thresh, left, right, X):
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= thresh[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


def route_leaf_ids_numpy(feature, thresh, left, right, X):
    """Vectorized routing: advance all rows level by level."""
    n = X.shape[0]
    nodes = np.zeros(n, dtype=np.int64)
    active = feature[nodes] >= 0
    while active.any():
        idx = np.nonzero(active)[0]
        cur = nodes[idx]
        goes_left = X[idx, feature[cur]] <= thresh[cur]
        nodes[idx] = np.where(goes_left, left[cur], right[cur])
        active[idx] = feature[nodes[idx]] >= 0
    return nodes


_want_numba = os.environ.get("PMOPT_DISABLE_NUMBA", "") in ("", "0")
lp_phase_numba = None
route_leaf_ids_numba = None
if _want_numba:
    try:
        from numba import njit

        lp_phase_numba = njit(cache=True)(_lp_phase_py)
        route_leaf_ids_numba = njit(cache=True)(_route_leaf_ids_py)
        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba is a declared dependency
        BACKEND = "numpy"
else:
    BACKEND = "numpy"

if BACKEND == "numba":
    lp_phase = lp_phase_numba
    route_leaf_ids = route_leaf_ids_numba
else:
    lp_phase = lp_phase_numpy
    route_leaf_ids = route_leaf_ids_numpy


def warmup():
    """Force kernel compilation so timings and worker processes start hot."""
    T = np.array([[1.0, 1.0, 1.0, 0.0], [1.0, -1.0, 0.0, 1.0]])
    xB = np.array([1.0, 1.0])
    d = np.array([-1.0, -1.0, 0.0, 0.0])
    basis = np.array([2, 3], dtype=np.int64)
    vstat = np.array([0, 0, 2, 2], dtype=np.int8)
    lo = np.array([0.0, 0.0, 0.0, 0.0])
    hi = np.array([np.inf] * 4)
    lp_phase(T, xB, d, basis, vstat, lo, hi, 0.0, 1000, 0, 50,
             _DJ_TOL, _TIE_TOL)
    feature = np.array([0, -1, -1], dtype=np.int32)
    thresh = np.array([0.5, 0.0, 0.0])
    left = np.array([1, -1, -1], dtype=np.int32)
    right = np.array([2, -1, -1], dtype=np.int32)
    route_leaf_ids(feature, thresh, left, right, np.array([[0.25], [0.75]]))
