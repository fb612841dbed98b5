"""Independent feasibility audits.

These evaluate a reported solution directly against the model's rows, bounds,
integrality, and the relevance definitions (recomputed from raw data), never
against solver internals.
"""

from __future__ import annotations

import numpy as np

from .. import linalg
from ..model import BINARY, ModelIR


def audit_solution(model: ModelIR, values: np.ndarray,
                   feas_tol: float = 1e-6, int_tol: float = 1e-5,
                   quad_tol: float = 1e-6) -> dict:
    """Max violations of every constraint class for a full assignment."""
    values = np.asarray(values, dtype=float)
    row_viol = 0.0
    for con in model.linear:
        lhs = sum(values[vid] * coef for vid, coef in con.terms)
        if con.sense == "<=":
            row_viol = max(row_viol, lhs - con.rhs)
        elif con.sense == ">=":
            row_viol = max(row_viol, con.rhs - lhs)
        else:
            row_viol = max(row_viol, abs(lhs - con.rhs))
    bound_viol = 0.0
    int_viol = 0.0
    for v in model.variables:
        val = values[v.vid]
        if np.isfinite(v.lower):
            bound_viol = max(bound_viol, v.lower - val)
        if np.isfinite(v.upper):
            bound_viol = max(bound_viol, val - v.upper)
        if v.kind == BINARY:
            int_viol = max(int_viol, abs(val - round(val)))
    quad_viol = 0.0
    if model.quadratic is not None:
        x_ids, mu, cinv, gamma = model.quadratic.ellipsoid
        g2 = linalg.quadratic_form(values[np.asarray(x_ids, dtype=np.int64)],
                                   mu, cinv)
        quad_viol = max(0.0, g2 - gamma * gamma)
    return {
        "row_violation": float(row_viol),
        "bound_violation": float(bound_viol),
        "integrality_violation": float(int_viol),
        "quadratic_violation": float(quad_viol),
        "ok": bool(row_viol <= feas_tol and bound_viol <= feas_tol
                   and int_viol <= int_tol and quad_viol <= quad_tol),
    }


def knn_audit(x, reference, K: int, gamma: float,
              z_reported=None, tol: float = 1e-6) -> dict:
    """Recompute L1 distances from scratch and check the mean of the K
    smallest against gamma; optionally compare the reported order
    statistics against the sorted distances."""
    x = np.asarray(x, dtype=float)
    ref = np.asarray(reference, dtype=float)
    dists = np.sort(np.abs(ref - x[None, :]).sum(axis=1), kind="stable")
    mean_k = float(dists[:K].mean())
    out = {"mean_k_dist": mean_k, "ok": bool(mean_k <= gamma + tol)}
    if z_reported is not None:
        z = np.asarray(z_reported, dtype=float)
        out["z_error"] = float(np.max(np.abs(z - dists[:K])))
        out["ok"] = bool(out["ok"] and out["z_error"] <= tol)
    return out


def mahalanobis_audit(x, mu, cinv, gamma: float, tol: float = 1e-6) -> dict:
    """Covariance-scaled distance of x from mu, compared against gamma."""
    g = float(np.sqrt(linalg.quadratic_form(x, mu, cinv)))
    return {"distance": g, "ok": bool(g <= gamma + tol)}


def box_membership(x, leaf_lo, leaf_hi, margin: float = 0.0) -> bool:
    """Does x sit inside the box with the given interior margin?"""
    x = np.asarray(x, dtype=float)
    return bool(np.all(x >= leaf_lo + margin) and np.all(x <= leaf_hi - margin))
