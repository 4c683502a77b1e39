"""The discontinuous field Psi(x) and its limit values at switching surfaces.

With r(x) = grad_h(x)^T h(x) and P(x) = 1 - H(x):

    Psi(x) = -r - P grad_f        if G(x) <= 0
    Psi(x) = -r - P sum_{i in I} grad_g_i   if G(x) > 0

where G = max_i g_i and I is the set of maximising indices.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .model import Evaluation, Problem, active_set_of

OBJECTIVE = -1  # owner tag of the f-generator
_DISTINCT = 1e-12
_MIN_PIVOT = 1e-12


class QualificationError(ArithmeticError):
    """A constraint qualification fails at the current point."""


class Regime(str, enum.Enum):
    INTERIOR = "interior"
    INFEASIBLE = "infeasible"
    SURFACE = "surface"
    NO_INEQUALITIES = "free"


@dataclass(frozen=True)
class Projection:
    """Orthogonal projector onto span of the equality gradients."""

    matrix: np.ndarray  # H, (N, N)
    jac_h: np.ndarray  # (n, N)
    gram_inverse: np.ndarray  # (n, n)

    @property
    def complement(self) -> np.ndarray:
        return np.eye(self.matrix.shape[0]) - self.matrix

    def project_out(self, v: np.ndarray) -> np.ndarray:
        """(1 - H) v for a vector or for each row of a matrix."""
        if not self.jac_h.shape[0]:
            return np.array(v, dtype=float)
        return v - v @ self.matrix  # H symmetric


def projection_from_jacobian(jac_h: np.ndarray) -> Projection:
    n, N = jac_h.shape
    if n == 0:
        return Projection(np.zeros((N, N)), jac_h, np.zeros((0, 0)))
    gram = jac_h @ jac_h.T
    try:
        L = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        raise QualificationError("equality Gram matrix is not positive definite") from None
    pivot = float(np.diag(L).min() ** 2)
    if pivot < _MIN_PIVOT:
        raise QualificationError(f"equality Gram matrix is singular (smallest pivot {pivot:.3g})")
    L_inv = np.linalg.inv(L)
    W = L_inv @ jac_h
    return Projection(W.T @ W, jac_h, L_inv.T @ L_inv)


def projection(p, x) -> Projection:
    return projection_from_jacobian(p.evaluate(x).jac_h)


@dataclass(frozen=True)
class FieldSample:
    """Psi at one point.

    ``generators`` holds the limit values whose convex hull is the
    set-valued extension on a switching surface; ``owners[k]`` lists the
    pieces (constraint indices, or OBJECTIVE) that produce generator k.
    The f-generator, when present, is last.
    """

    regime: Regime
    value: np.ndarray | None
    generators: tuple[np.ndarray, ...]
    owners: tuple[tuple[int, ...], ...]
    f: float
    G: float
    normh2: float
    active: tuple[int, ...]

    @property
    def monitors(self) -> dict:
        return {"f": self.f, "G": self.G, "normh2": self.normh2, "active": list(self.active)}


def classify(G: float, band: float, has_inequalities: bool = True) -> Regime:
    if not has_inequalities:
        return Regime.NO_INEQUALITIES
    if G > band:
        return Regime.INFEASIBLE
    if G < -band:
        return Regime.INTERIOR
    return Regime.SURFACE


def _merge(vectors: list[np.ndarray], owners: list[tuple[int, ...]]):
    """Merge generators closer than 1e-12, keeping the f-generator last."""
    out_v: list[np.ndarray] = []
    out_o: list[tuple[int, ...]] = []
    for v, o in zip(vectors, owners):
        hit = next(
            (k for k, w in enumerate(out_v) if np.max(np.abs(v - w)) <= _DISTINCT), None
        )
        if hit is None:
            out_v.append(v)
            out_o.append(o)
        elif OBJECTIVE in o:
            merged = out_o.pop(hit) + o
            out_v.pop(hit)
            out_v.append(v)
            out_o.append(merged)
        else:
            out_o[hit] = out_o[hit] + o
    return tuple(out_v), tuple(out_o)


def sample_from(ev: Evaluation, proj: Projection, band: float, tol_act: float) -> FieldSample:
    """Field sample from precomputed function values and projection."""
    r = ev.jac_h.T @ ev.h if ev.h.size else np.zeros_like(ev.x)
    v_f = -r - proj.project_out(ev.grad_f)
    if ev.g.size == 0:
        return FieldSample(Regime.NO_INEQUALITIES, v_f, (v_f,), ((OBJECTIVE,),), ev.f, -np.inf, ev.normh2, ())
    act = active_set_of(ev, tol_act)
    regime = classify(act.level, band)
    idx = list(act.indices)
    v_g = -r - proj.project_out(ev.jac_g[idx])
    owners = [(i,) for i in idx]
    if regime is Regime.INTERIOR:
        value, gens, own = v_f, (v_f,), ((OBJECTIVE,),)
    elif regime is Regime.INFEASIBLE:
        value = -r - proj.project_out(act.summed_gradient)
        if len(idx) == 1:
            gens, own = (value,), tuple(owners)
        else:
            gens, own = _merge(list(v_g), owners)
    else:
        value = None
        gens, own = _merge(list(v_g) + [v_f], owners + [(OBJECTIVE,)])
    return FieldSample(regime, value, gens, own, ev.f, act.level, ev.normh2, act.indices)


def sample(p: Problem, x, band: float = 1e-7, tol_act: float = 1e-8) -> FieldSample:
    ev = p.evaluate(x)
    return sample_from(ev, projection_from_jacobian(ev.jac_h), band, tol_act)


def smooth_value(p: Problem, x) -> np.ndarray:
    """Psi(x) taken literally from the two-branch formula (f-branch at G = 0)."""
    ev = p.evaluate(x)
    proj = projection_from_jacobian(ev.jac_h)
    r = ev.jac_h.T @ ev.h if ev.h.size else np.zeros_like(ev.x)
    if ev.g.size and ev.G > 0:
        return -r - proj.project_out(active_set_of(ev, 0.0).summed_gradient)
    return -r - proj.project_out(ev.grad_f)
