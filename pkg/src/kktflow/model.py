"""Problem data: minimise f(x) subject to g(x) <= 0 and h(x) = 0."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expr import Expression, ExprError, parse


class ProblemError(ValueError):
    pass


@dataclass(frozen=True)
class Evaluation:
    """Values and Jacobians of every function of a problem at one point."""

    x: np.ndarray
    f: float
    grad_f: np.ndarray  # (N,)
    g: np.ndarray  # (m,)
    jac_g: np.ndarray  # (m, N)
    h: np.ndarray  # (n,)
    jac_h: np.ndarray  # (n, N)

    @property
    def G(self) -> float:
        return float(self.g.max()) if self.g.size else -np.inf

    @property
    def normh2(self) -> float:
        return float(self.h @ self.h)


@dataclass(frozen=True)
class Problem:
    objective: Expression
    inequalities: tuple[Expression, ...] = ()
    equalities: tuple[Expression, ...] = ()
    n_vars: int = field(default=0)

    def __post_init__(self):
        object.__setattr__(self, "inequalities", tuple(self.inequalities))
        object.__setattr__(self, "equalities", tuple(self.equalities))
        if self.n_vars == 0:
            object.__setattr__(self, "n_vars", self.objective.n_vars)
        for e in (self.objective, *self.inequalities, *self.equalities):
            if e.n_vars != self.n_vars:
                raise ProblemError("all expressions must share the same number of variables")
        if self.equalities and len(self.equalities) >= self.n_vars:
            raise ProblemError("need fewer equality constraints than variables")

    @property
    def m(self) -> int:
        return len(self.inequalities)

    @property
    def n(self) -> int:
        return len(self.equalities)

    @property
    def is_smooth(self) -> bool:
        return all(e.is_smooth for e in (self.objective, *self.inequalities, *self.equalities))

    def evaluate(self, x) -> Evaluation:
        x = np.asarray(x, dtype=float)
        # the compiled kernels run much faster on Python floats than on numpy scalars
        xl = x.tolist()
        f, df = self.objective.eval_grad_list(xl)
        g, jg = _stack(self.inequalities, xl)
        h, jh = _stack(self.equalities, xl)
        return Evaluation(x, f, np.array(df), g, jg, h, jh)

    def to_text(self) -> str:
        lines = [f"vars {self.n_vars}", f"min {self.objective}"]
        lines += [f"ineq {e}" for e in self.inequalities]
        lines += [f"eq {e}" for e in self.equalities]
        return "\n".join(lines) + "\n"


def _stack(exprs, x):
    n = len(x)
    if not exprs:
        return np.zeros(0), np.zeros((0, n))
    pairs = [e.eval_grad_list(x) for e in exprs]
    return np.array([v for v, _ in pairs]), np.array([d for _, d in pairs])


def make_problem(n_vars: int, objective: str, inequalities=(), equalities=()) -> Problem:
    """Build a problem from expression strings."""
    return Problem(
        parse(objective, n_vars),
        tuple(parse(s, n_vars) for s in inequalities),
        tuple(parse(s, n_vars) for s in equalities),
        n_vars,
    )


def parse_problem(text: str, allow_nonsmooth: bool = False) -> Problem:
    """Read the line format ``vars N`` / ``min e`` / ``ineq e`` / ``eq e``."""
    n_vars = None
    objective = None
    ineqs, eqs = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, rest = line.partition(" ")
        rest = rest.strip()
        try:
            if key == "vars":
                if n_vars is not None:
                    raise ProblemError("duplicate 'vars' line")
                n_vars = int(rest)
                if n_vars < 1:
                    raise ProblemError("'vars' must be positive")
                continue
            if n_vars is None:
                raise ProblemError("first line must be 'vars N'")
            if key == "min":
                if objective is not None:
                    raise ProblemError("duplicate objective")
                objective = parse(rest, n_vars)
            elif key == "ineq":
                ineqs.append(parse(rest, n_vars))
            elif key == "eq":
                eqs.append(parse(rest, n_vars))
            else:
                raise ProblemError(f"unknown keyword {key!r}")
        except (ExprError, ValueError) as err:
            raise ProblemError(f"line {lineno}: {err}") from None
    if n_vars is None or objective is None:
        raise ProblemError("problem needs 'vars N' and a 'min' line")
    problem = Problem(objective, tuple(ineqs), tuple(eqs), n_vars)
    if not allow_nonsmooth and not problem.is_smooth:
        raise ProblemError("abs() makes the problem nonsmooth; pass --allow-nonsmooth to accept")
    return problem


# --- active set --------------------------------------------------------------


@dataclass(frozen=True)
class ActiveSet:
    level: float
    indices: tuple[int, ...]
    summed_gradient: np.ndarray


def active_set_of(ev: Evaluation, tol_act: float) -> ActiveSet:
    if ev.g.size == 0:
        raise ProblemError("active set needs at least one inequality")
    level = float(ev.g.max())
    idx = tuple(int(i) for i in np.flatnonzero(ev.g >= level - tol_act))
    return ActiveSet(level, idx, ev.jac_g[list(idx)].sum(axis=0))


def active_set(p: Problem, x, tol_act: float) -> ActiveSet:
    return active_set_of(p.evaluate(x), tol_act)


def feasibility_residual(p, x) -> tuple[float, float]:
    ev = p.evaluate(x)
    return _violations(ev)


def _violations(ev: Evaluation) -> tuple[float, float]:
    ineq = max(0.0, ev.G) if ev.g.size else 0.0
    eq = float(np.abs(ev.h).max()) if ev.h.size else 0.0
    return ineq, eq


# --- constraint qualifications -----------------------------------------------


@dataclass
class QualificationReport:
    """Standing hypotheses checked at one point.

    ``gram_invertible``: the equality Jacobian has full row rank.
    ``subspaces_independent``: equality gradients and active inequality
    gradients span subspaces meeting only at 0.
    ``hull_excludes_zero``: 0 is not a convex combination of the active
    inequality gradients.  The last two are hypotheses about points with
    G(x) = 0; ``on_surface`` says whether that holds here.
    """

    x: list[float]
    gram_invertible: bool
    gram_min_eigenvalue: float | None
    subspaces_independent: bool
    rank_h: int
    rank_g: int
    rank_stacked: int
    hull_excludes_zero: bool
    hull_distance: float | None
    level: float | None
    active: list[int]
    on_surface: bool

    @property
    def ok(self) -> bool:
        return self.gram_invertible and self.subspaces_independent and self.hull_excludes_zero

    def to_dict(self) -> dict:
        return {
            "x": self.x,
            "gram_invertible": self.gram_invertible,
            "gram_min_eigenvalue": self.gram_min_eigenvalue,
            "subspaces_independent": self.subspaces_independent,
            "rank_h": self.rank_h,
            "rank_g": self.rank_g,
            "rank_stacked": self.rank_stacked,
            "hull_excludes_zero": self.hull_excludes_zero,
            "hull_distance": self.hull_distance,
            "level": self.level,
            "active": self.active,
            "on_surface": self.on_surface,
            "ok": self.ok,
        }


def qualifications_from(
    ev: Evaluation, tol: float = 1e-10, tol_act: float = 1e-8, band: float = 1e-7
) -> QualificationReport:
    from .filippov import hull_distance

    jh = ev.jac_h
    if jh.shape[0]:
        eig = float(np.linalg.eigvalsh(jh @ jh.T).min())
        gram_ok = eig > tol
        rank_h = int(np.linalg.matrix_rank(jh, tol=np.sqrt(tol)))
    else:
        eig, gram_ok, rank_h = None, True, 0
    if ev.g.size:
        act = active_set_of(ev, tol_act * (1 + abs(ev.G)))
        level, active = act.level, list(act.indices)
        jg = ev.jac_g[active]
        rank_g = int(np.linalg.matrix_rank(jg, tol=np.sqrt(tol)))
        rank_all = int(np.linalg.matrix_rank(np.vstack([jh, jg]), tol=np.sqrt(tol)))
        hd = hull_distance(list(jg)).distance
        hull_ok = hd > tol
        on_surface = abs(level) <= band * (1 + np.linalg.norm(ev.x))
    else:
        level, active, rank_g, rank_all, hd, hull_ok, on_surface = None, [], 0, rank_h, None, True, False
    return QualificationReport(
        x=[float(v) for v in ev.x],
        gram_invertible=gram_ok,
        gram_min_eigenvalue=eig,
        subspaces_independent=rank_all == rank_h + rank_g,
        rank_h=rank_h,
        rank_g=rank_g,
        rank_stacked=rank_all,
        hull_excludes_zero=hull_ok,
        hull_distance=hd,
        level=level,
        active=active,
        on_surface=bool(on_surface),
    )


def check_qualifications(p, x, tol: float = 1e-10) -> QualificationReport:
    return qualifications_from(p.evaluate(x), tol)
