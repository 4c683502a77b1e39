"""Linear programs: min c x  s.t.  A x = a,  B x <= b.

For an LP the equality projector is constant, so every branch of the
field is affine in x.  :class:`LinearProgram` can be handed straight to
the integrator (it evaluates without expression trees and exposes its
constant projection); :func:`lp_to_problem` gives the same problem in
generic form for cross-checking.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .expr import parse
from .field import FieldSample, Projection, Regime, classify, projection_from_jacobian
from .model import Evaluation, Problem, QualificationReport, qualifications_from


class LpError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LinearProgram:
    c: np.ndarray
    A: np.ndarray
    a: np.ndarray
    B: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        N = len(c)
        A = np.asarray(self.A, dtype=float).reshape(-1, N)
        B = np.asarray(self.B, dtype=float).reshape(-1, N)
        a = np.asarray(self.a, dtype=float).ravel()
        b = np.asarray(self.b, dtype=float).ravel()
        if len(a) != A.shape[0] or len(b) != B.shape[0]:
            raise LpError("right-hand sides do not match the constraint matrices")
        if A.shape[0] >= N:
            raise LpError("need fewer equality rows than variables")
        for name, v in (("c", c), ("A", A), ("a", a), ("B", B), ("b", b)):
            if not np.all(np.isfinite(v)):
                raise LpError(f"{name} has non-finite entries")
            object.__setattr__(self, name, v)

    @classmethod
    def create(cls, c, A=None, a=None, B=None, b=None) -> LinearProgram:
        N = len(np.ravel(c))
        return cls(
            c,
            np.zeros((0, N)) if A is None else A,
            np.zeros(0) if a is None else a,
            np.zeros((0, N)) if B is None else B,
            np.zeros(0) if b is None else b,
        )

    @property
    def n_vars(self) -> int:
        return len(self.c)

    @property
    def m(self) -> int:
        return self.B.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[0]

    is_smooth = True

    def evaluate(self, x) -> Evaluation:
        x = np.asarray(x, dtype=float)
        return Evaluation(x, float(self.c @ x), self.c, self.B @ x - self.b, self.B, self.A @ x - self.a, self.A)

    @cached_property
    def constant_projection(self) -> Projection:
        return projection_from_jacobian(self.A)

    @cached_property
    def field(self) -> LpField:
        proj = self.constant_projection
        return LpField(proj.matrix, proj.project_out(self.c), proj.project_out(self.B), self)


@dataclass(frozen=True, eq=False)
class LpField:
    """Precomputed pieces of the LP field: H, (1-H)c and the rows (1-H)B_i."""

    H_const: np.ndarray
    projected_cost: np.ndarray
    row_projections: np.ndarray
    lp: LinearProgram

    def sample(self, x, band: float = 1e-7, tol_act: float = 1e-8) -> FieldSample:
        lp = self.lp
        x = np.asarray(x, dtype=float)
        h = lp.A @ x - lp.a
        r = lp.A.T @ h
        v_f = -r - self.projected_cost
        f = float(lp.c @ x)
        if not lp.m:
            return FieldSample(Regime.NO_INEQUALITIES, v_f, (v_f,), ((-1,),), f, -np.inf, float(h @ h), ())
        g = lp.B @ x - lp.b
        G = float(g.max())
        idx = [int(i) for i in np.flatnonzero(g >= G - tol_act)]
        regime = classify(G, band)
        rows = -r - self.row_projections[idx]
        if regime is Regime.INTERIOR:
            value, gens, own = v_f, (v_f,), ((-1,),)
        elif regime is Regime.INFEASIBLE:
            value = -r - self.row_projections[idx].sum(axis=0)
            gens, own = _distinct(list(rows), [(i,) for i in idx]) if len(idx) > 1 else ((value,), ((idx[0],),))
        else:
            value = None
            gens, own = _distinct(list(rows) + [v_f], [(i,) for i in idx] + [(-1,)])
        return FieldSample(regime, value, gens, own, f, G, float(h @ h), tuple(idx))


def _distinct(vectors, owners):
    out_v, out_o = [], []
    for v, o in zip(vectors, owners):
        k = next((k for k, w in enumerate(out_v) if np.max(np.abs(v - w)) <= 1e-12), None)
        if k is None:
            out_v.append(v)
            out_o.append(o)
        elif -1 in o:
            out_v.pop(k)
            merged = out_o.pop(k) + o
            out_v.append(v)
            out_o.append(merged)
        else:
            out_o[k] = out_o[k] + o
    return tuple(out_v), tuple(out_o)


# --- transcription -----------------------------------------------------------


def _num(v: float) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)


def affine_text(coeffs, const=0.0) -> str:
    """'x1 + 2*x2 - 1' style text for sum_k coeffs[k] x_{k+1} + const."""
    terms = []
    for k, cf in enumerate(coeffs):
        if cf == 0:
            continue
        mag = abs(cf)
        body = f"x{k + 1}" if mag == 1 else f"{_num(mag)}*x{k + 1}"
        terms.append(("-" if cf < 0 else "+", body))
    if const != 0 or not terms:
        terms.append(("-" if const < 0 else "+", _num(abs(const))))
    first_sign, first = terms[0]
    text = ("-" if first_sign == "-" else "") + first
    for sign, body in terms[1:]:
        text += f" {sign} {body}"
    return text


def lp_to_problem(lp: LinearProgram) -> Problem:
    N = lp.n_vars
    return Problem(
        parse(affine_text(lp.c), N),
        tuple(parse(affine_text(row, -rhs), N) for row, rhs in zip(lp.B, lp.b)),
        tuple(parse(affine_text(row, -rhs), N) for row, rhs in zip(lp.A, lp.a)),
        N,
    )


def check_corollary_hypotheses(lp: LinearProgram, x, tol: float = 1e-10) -> QualificationReport:
    return qualifications_from(lp.evaluate(np.asarray(x, dtype=float)), tol)


# --- vertex enumeration oracle ---------------------------------------------------


@dataclass
class LpSolution:
    status: str  # "optimal" | "unbounded" | "infeasible"
    x: np.ndarray | None = None
    value: float | None = None
    unique: bool | None = None
    vertices: list[np.ndarray] | None = None

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "x": None if self.x is None else [float(v) for v in self.x],
            "value": self.value,
            "unique": self.unique,
            "vertex_count": None if self.vertices is None else len(self.vertices),
        }


def _null_space(M, N, tol=1e-10):
    if M.shape[0] == 0:
        return np.eye(N)
    _, s, vt = np.linalg.svd(M)
    rank = int((s > tol * max(1.0, s.max())).sum())
    return vt[rank:]


def _feasible(lp, x, tol):
    ok_b = not lp.m or (lp.B @ x - lp.b).max() <= tol * (1 + np.abs(lp.b).max(initial=0))
    ok_a = not lp.n or np.abs(lp.A @ x - lp.a).max() <= tol * (1 + np.abs(lp.a).max(initial=0))
    return ok_b and ok_a


def _grid_probe(lp, radius, budget=100_000):
    N = lp.n_vars
    k = max(2, int(budget ** (1.0 / N)))
    axis = np.linspace(-radius, radius, k)
    proj = lp.constant_projection if lp.n else None
    for point in itertools.product(axis, repeat=N):
        x = np.array(point)
        if proj is not None:
            x = x - lp.A.T @ (proj.gram_inverse @ (lp.A @ x - lp.a))
        if _feasible(lp, x, 1e-9):
            return True
    return False


def vertex_oracle(lp: LinearProgram, tol: float = 1e-9) -> LpSolution:
    """Brute-force LP solution by enumerating basic points.

    Lines contained in the feasible set are removed first: if the cost
    varies along one the LP is unbounded (when feasible), otherwise the
    line directions are pinned with extra equalities.
    """
    N = lp.n_vars
    if lp.n and np.linalg.matrix_rank(lp.A) < lp.n:
        raise LpError("equality rows are linearly dependent")
    L = _null_space(np.vstack([lp.A, lp.B]), N)
    cost_on_lines = bool(L.shape[0]) and np.abs(L @ lp.c).max() > 1e-12 * (1 + np.abs(lp.c).max())
    A = np.vstack([lp.A, L])
    a = np.concatenate([lp.a, np.zeros(L.shape[0])])
    free = N - A.shape[0]
    vertices: list[np.ndarray] = []
    active_sets: list[list[int]] = []
    for S in itertools.combinations(range(lp.m), free):
        M = np.vstack([A, lp.B[list(S)]])
        if np.linalg.matrix_rank(M) < N:
            continue
        x = np.linalg.solve(M, np.concatenate([a, lp.b[list(S)]])) + 0.0
        if not _feasible(lp, x, tol):
            continue
        if any(np.linalg.norm(x - v) <= 1e-9 * (1 + np.linalg.norm(v)) for v in vertices):
            continue
        vertices.append(x)
        resid = lp.B @ x - lp.b
        active_sets.append([i for i in range(lp.m) if abs(resid[i]) <= tol * (1 + abs(lp.b[i]))])
    if not vertices:
        radius = 10.0 * (1.0 + max(np.abs(lp.b).max(initial=0), np.abs(lp.a).max(initial=0)))
        if _grid_probe(lp, radius):
            raise LpError("no basic feasible point found although a feasible point exists")
        return LpSolution("infeasible", vertices=[])
    if cost_on_lines:
        return LpSolution("unbounded", vertices=vertices)
    values = np.array([lp.c @ v for v in vertices])
    best = int(np.argmin(values))
    vstar = float(values[best])
    flat_edge = False
    for x, act in zip(vertices, active_sets):
        for d in _edge_rays(lp, A, act, N):
            slope = float(lp.c @ d)
            if slope < -1e-12 * (1 + np.abs(lp.c).max()):
                return LpSolution("unbounded", vertices=vertices)
            if abs(slope) <= 1e-12 * (1 + np.abs(lp.c).max()) and abs(lp.c @ x - vstar) <= tol * (1 + abs(vstar)):
                flat_edge = True
    ties = int((values <= vstar + tol * (1 + abs(vstar))).sum())
    unique = ties == 1 and not flat_edge and L.shape[0] == 0
    return LpSolution("optimal", vertices[best], vstar, unique, vertices)


def _edge_rays(lp, A, active, N):
    """Unbounded edge directions leaving a vertex (recession directions only)."""
    need = N - A.shape[0] - 1
    for S in itertools.combinations(active, need):
        M = np.vstack([A, lp.B[list(S)]])
        Z = _null_space(M, N)
        if Z.shape[0] != 1:
            continue
        for d in (Z[0], -Z[0]):
            if lp.m == 0 or (lp.B @ d).max() <= 1e-12:
                yield d


# --- text format ---------------------------------------------------------------


def parse_lp(text: str) -> LinearProgram:
    """Dense LP format: ``lp`` / ``n N`` / ``min c..`` / ``eq a.. = r`` / ``ineq b.. <= r``."""
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [(k + 1, ln) for k, ln in enumerate(lines) if ln]
    if not lines or lines[0][1] != "lp":
        raise LpError("LP file must start with 'lp'")
    N = None
    c = None
    A, a, B, b = [], [], [], []

    def nums(parts, lineno):
        try:
            vals = [float(t) for t in parts]
        except ValueError:
            raise LpError(f"line {lineno}: expected numbers") from None
        if N is not None and len(vals) != N:
            raise LpError(f"line {lineno}: expected {N} coefficients, got {len(vals)}")
        return vals

    for lineno, ln in lines[1:]:
        key, *rest = ln.split()
        if key == "n":
            if N is not None or len(rest) != 1:
                raise LpError(f"line {lineno}: malformed 'n' line")
            N = int(rest[0])
            if N < 1:
                raise LpError(f"line {lineno}: N must be positive")
            continue
        if N is None:
            raise LpError(f"line {lineno}: 'n N' must precede the data")
        if key == "min":
            if c is not None:
                raise LpError(f"line {lineno}: duplicate 'min'")
            c = nums(rest, lineno)
        elif key in ("eq", "ineq"):
            sep = "=" if key == "eq" else "<="
            if sep not in rest or rest.index(sep) != len(rest) - 2:
                raise LpError(f"line {lineno}: expected '{sep} rhs' at the end")
            row = nums(rest[:-2], lineno)
            try:
                rhs = float(rest[-1])
            except ValueError:
                raise LpError(f"line {lineno}: bad right-hand side") from None
            (A if key == "eq" else B).append(row)
            (a if key == "eq" else b).append(rhs)
        else:
            raise LpError(f"line {lineno}: unknown keyword {key!r}")
    if N is None or c is None:
        raise LpError("LP needs 'n N' and 'min' lines")
    return LinearProgram(c, np.array(A).reshape(-1, N), a, np.array(B).reshape(-1, N), b)


def lp_text(lp: LinearProgram) -> str:
    out = ["lp", f"n {lp.n_vars}", "min " + " ".join(_num(v) for v in lp.c)]
    out += ["eq " + " ".join(_num(v) for v in row) + f" = {_num(r)}" for row, r in zip(lp.A, lp.a)]
    out += ["ineq " + " ".join(_num(v) for v in row) + f" <= {_num(r)}" for row, r in zip(lp.B, lp.b)]
    return "\n".join(out) + "\n"
