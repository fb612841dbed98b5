"""Solver-neutral optimization model: variables, rows, objective, LP export.

Encoders build one of these; the embedded solver and the LP-file writer both
consume it. A model holds at most one quadratic constraint (a single
covariance ellipsoid), which keeps the cut loop in the solver simple.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import InvertedBounds, SecondQuadratic, UnknownVariable

CONTINUOUS = "continuous"
BINARY = "binary"

MIN = "min"
MAX = "max"

_SENSES = ("<=", "=", ">=")


@dataclass(frozen=True)
class Variable:
    vid: int
    kind: str
    lower: float
    upper: float
    name: str


@dataclass(frozen=True)
class LinConstraint:
    terms: tuple          # ((vid, coef), ...) no duplicate vids
    sense: str            # one of <=, =, >=
    rhs: float
    name: str = ""


@dataclass(frozen=True)
class QuadConstraint:
    """Convex row: sum quad_terms + sum lin_terms <= rhs.

    ``ellipsoid`` is the convexity certificate and the structured form the
    cut loop works from: (x_ids, mu, cinv, gamma) encodes
    (x - mu)^T cinv (x - mu) <= gamma^2 with cinv symmetric positive
    definite.
    """

    quad_terms: tuple      # ((vid_i, vid_j, coef), ...)
    lin_terms: tuple       # ((vid, coef), ...)
    rhs: float
    ellipsoid: tuple       # (x_ids, mu, cinv, gamma)
    name: str = "ellipsoid"

    @staticmethod
    def from_ellipsoid(x_ids, mu, cinv, gamma) -> "QuadConstraint":
        x_ids = tuple(int(v) for v in x_ids)
        mu = np.asarray(mu, dtype=float)
        cinv = np.asarray(cinv, dtype=float)
        n = len(x_ids)
        quad = []
        for i in range(n):
            for j in range(i, n):
                coef = cinv[i, j] if i == j else cinv[i, j] + cinv[j, i]
                if coef != 0.0:
                    quad.append((x_ids[i], x_ids[j], float(coef)))
        lin_vec = -2.0 * (cinv @ mu)
        lin = [(x_ids[i], float(lin_vec[i])) for i in range(n) if lin_vec[i] != 0.0]
        rhs = float(gamma) ** 2 - float(mu @ cinv @ mu)
        return QuadConstraint(tuple(quad), tuple(lin), rhs,
                              (x_ids, mu, cinv, float(gamma)))


class ModelIR:
    """Mutable while being assembled; treat as immutable once validated."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: list[Variable] = []
        self.linear: list[LinConstraint] = []
        self.quadratic: QuadConstraint | None = None
        self.obj_sense: str = MIN
        self.obj_terms: tuple = ()
        self.obj_constant: float = 0.0
        # encoder bookkeeping: which variables form the decision vector x,
        # plus structured info needed for decoding and audits
        self.x_ids: list[int] = []
        self.meta: dict = {}

    # -- construction -------------------------------------------------------

    def add_variable(self, kind: str, lower: float, upper: float,
                     name: str = "") -> int:
        if kind not in (CONTINUOUS, BINARY):
            raise ValueError(f"unknown variable kind {kind!r}")
        if lower > upper:
            raise InvertedBounds(f"{name or 'var'}: lower {lower} > upper {upper}")
        if kind == BINARY and not (0.0 <= lower and upper <= 1.0):
            raise InvertedBounds(f"binary {name or 'var'} bounds must lie in [0,1]")
        vid = len(self.variables)
        self.variables.append(
            Variable(vid, kind, float(lower), float(upper), name or f"x{vid}"))
        return vid

    def _check_terms(self, terms):
        seen = set()
        out = []
        for vid, coef in terms:
            vid = int(vid)
            if vid < 0 or vid >= len(self.variables):
                raise UnknownVariable(f"variable id {vid} not declared")
            if vid in seen:
                raise UnknownVariable(f"duplicate variable id {vid} in one row")
            seen.add(vid)
            out.append((vid, float(coef)))
        return tuple(out)

    def add_linear(self, terms, sense: str, rhs: float, name: str = "") -> None:
        if sense not in _SENSES:
            raise ValueError(f"bad sense {sense!r}")
        self.linear.append(LinConstraint(
            self._check_terms(terms), sense, float(rhs),
            name or f"c{len(self.linear)}"))

    def add_quadratic(self, qc: QuadConstraint) -> None:
        if self.quadratic is not None:
            raise SecondQuadratic("model already has its quadratic constraint")
        for vid, _, _ in qc.quad_terms:
            if vid < 0 or vid >= len(self.variables):
                raise UnknownVariable(f"variable id {vid} not declared")
        self._check_terms(qc.lin_terms)
        self.quadratic = qc

    def set_objective(self, sense: str, terms, constant: float = 0.0) -> None:
        if sense not in (MIN, MAX):
            raise ValueError(f"bad objective sense {sense!r}")
        self.obj_sense = sense
        self.obj_terms = self._check_terms(terms)
        self.obj_constant = float(constant)

    def set_x_vars(self, ids) -> None:
        self.x_ids = [int(v) for v in ids]

    # -- queries --------------------------------------------------------------

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    def binaries(self) -> list[int]:
        return [v.vid for v in self.variables if v.kind == BINARY]

    def validate(self) -> bool:
        """Re-check every invariant; True on success, raises otherwise."""
        for v in self.variables:
            if v.lower > v.upper:
                raise InvertedBounds(v.name)
            if v.kind == BINARY and not (0.0 <= v.lower and v.upper <= 1.0):
                raise InvertedBounds(v.name)
        for con in self.linear:
            self._check_terms(con.terms)
        self._check_terms(self.obj_terms)
        if self.quadratic is not None:
            self._check_terms(self.quadratic.lin_terms)
            x_ids, mu, cinv, gamma = self.quadratic.ellipsoid
            if np.max(np.abs(cinv - cinv.T), initial=0.0) > 1e-10:
                raise SecondQuadratic("ellipsoid matrix must be symmetric")
        return True


# -- LP-format export ---------------------------------------------------------

_NAME_RE = re.compile(r"[^A-Za-z0-9_]")
_LEAD_BAD = re.compile(r"^\d|^[eE][\d.]")


def _num(v: float) -> str:
    return format(v, ".17g")


def _sanitize_names(model: ModelIR) -> list[str]:
    names = []
    used = set()
    for v in model.variables:
        nm = _NAME_RE.sub("_", v.name) or f"x{v.vid}"
        if _LEAD_BAD.match(nm):
            nm = "v" + nm
        if nm in used:
            nm = f"{nm}_{v.vid}"
        used.add(nm)
        names.append(nm)
    return names


def _terms_text(terms, names) -> str:
    if not terms:
        return "0 " + (names[0] if names else "x0")
    parts = []
    for vid, coef in terms:
        sign = "-" if coef < 0 else "+"
        parts.append(f"{sign} {_num(abs(coef))} {names[vid]}")
    txt = " ".join(parts)
    return txt[2:] if txt.startswith("+ ") else txt


def export_lp(model: ModelIR) -> str:
    """CPLEX-LP-format text for the model; deterministic byte-for-byte."""
    model.validate()
    names = _sanitize_names(model)
    lines = []
    lines.append("\\ " + model.name)
    lines.append("Minimize" if model.obj_sense == MIN else "Maximize")
    obj = _terms_text(model.obj_terms, names)
    if model.obj_constant != 0.0:
        sign = "-" if model.obj_constant < 0 else "+"
        obj += f" {sign} {_num(abs(model.obj_constant))} ONE_VAR_CONSTANT"
    lines.append(" obj: " + obj)
    lines.append("Subject To")
    for con in model.linear:
        lines.append(f" {con.name}: {_terms_text(con.terms, names)} "
                     f"{con.sense} {_num(con.rhs)}")
    if model.quadratic is not None:
        qc = model.quadratic
        qparts = []
        for vi, vj, coef in qc.quad_terms:
            sign = "-" if coef < 0 else "+"
            if vi == vj:
                qparts.append(f"{sign} {_num(abs(coef))} {names[vi]} ^2")
            else:
                qparts.append(f"{sign} {_num(abs(coef))} {names[vi]} * {names[vj]}")
        qtxt = " ".join(qparts)
        if qtxt.startswith("+ "):
            qtxt = qtxt[2:]
        body = f"[ {qtxt} ]"
        if qc.lin_terms:
            body += " + " + _terms_text(qc.lin_terms, names)
        lines.append(f" {qc.name}: {body} <= {_num(qc.rhs)}")
    lines.append("Bounds")
    for v in model.variables:
        nm = names[v.vid]
        lo, hi = v.lower, v.upper
        if lo == hi:
            lines.append(f" {nm} = {_num(lo)}")
        elif np.isfinite(lo) and np.isfinite(hi):
            lines.append(f" {_num(lo)} <= {nm} <= {_num(hi)}")
        elif np.isfinite(lo):
            lines.append(f" {nm} >= {_num(lo)}")
        elif np.isfinite(hi):
            lines.append(f" -infinity <= {nm} <= {_num(hi)}")
        else:
            lines.append(f" {nm} free")
    if model.obj_constant != 0.0:
        lines.append(" ONE_VAR_CONSTANT = 1")
    bins = model.binaries()
    if bins:
        lines.append("Binaries")
        lines.append(" " + " ".join(names[vid] for vid in bins))
    lines.append("End")
    return "\n".join(lines) + "\n"
