"""Set-valued extension of Psi on switching surfaces.

Small convex problems over the unit simplex do all the work here: the
distance from 0 to a convex hull, and the convex combination of limit
values that is tangent to the active surfaces (the sliding velocity).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import OBJECTIVE, FieldSample, Projection, QualificationError, Regime
from .kkt import KktCertificate, certificate_from

_DEGENERATE_WEIGHT = 1e-10


class DegenerateEquilibrium(QualificationError):
    """The objective generator carries no weight at an equilibrium."""


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {a >= 0, sum(a) = 1} (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / ks > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


def _face_solve(M, b, support):
    """min |M a - b|^2 with sum(a) = 1 and a = 0 off ``support``."""
    Ms = M[:, support]
    k = len(support)
    K = np.zeros((k + 1, k + 1))
    K[:k, :k] = 2 * Ms.T @ Ms
    K[:k, k] = 1.0
    K[k, :k] = 1.0
    rhs = np.concatenate([2 * Ms.T @ b, [1.0]])
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    a = np.zeros(M.shape[1])
    a[support] = sol[:k]
    return a


def _active_set_finish(M, b, a, max_rounds=None):
    """Primal-dual active-set refinement from the support of ``a``.

    Returns an exact minimiser or None when the refinement does not settle.
    """
    k = M.shape[1]
    support = [i for i in range(k) if a[i] > 1e-10] or [int(np.argmax(a))]
    scale = 1.0 + np.abs(M).max() ** 2 + np.abs(b).max(initial=0.0) * np.abs(M).max()
    for _ in range(max_rounds or 4 * k + 4):
        cand = _face_solve(M, b, support)
        neg = [i for i in support if cand[i] < -1e-14]
        if neg:
            # step from the feasible iterate towards cand until a coordinate hits 0
            d = cand - a
            ratios = [-a[i] / d[i] for i in support if d[i] < 0]
            t = min([1.0] + ratios)
            a = np.clip(a + t * d, 0.0, None)
            a /= a.sum()
            support = [i for i in support if a[i] > 1e-14] or [int(np.argmax(a))]
            continue
        cand = np.clip(cand, 0.0, None)
        cand /= cand.sum()
        grad = 2 * M.T @ (M @ cand - b)
        nu = grad[support].min()
        out = [j for j in range(k) if j not in support and grad[j] < nu - 1e-11 * scale]
        if not out:
            return cand
        a = cand
        support = sorted(support + [min(out, key=lambda j: grad[j])])
    return None


def simplex_least_squares(
    M: np.ndarray,
    b: np.ndarray | None = None,
    start: np.ndarray | None = None,
    tol: float = 1e-12,
    max_iter: int = 100_000,
) -> np.ndarray:
    """Minimise |M a - b|^2 over the unit simplex.

    Projected gradient with an exact line search along each projected step
    until the decrease falls below ``tol``.  The support of the iterate is
    periodically handed to an active-set refinement, which returns the
    exact face minimiser once it can certify optimality.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    k = M.shape[1]
    b = np.zeros(M.shape[0]) if b is None else np.asarray(b, dtype=float)
    if k == 1:
        return np.ones(1)
    # the minimiser is invariant under a common scaling of M and b; work at unit scale
    c = max(np.abs(M).max(), np.abs(b).max(initial=0.0))
    if c > 0.0:
        M, b = M / c, b / c
    a = np.full(k, 1.0 / k) if start is None else project_simplex(np.asarray(start, dtype=float))
    if start is not None:
        exact = _active_set_finish(M, b, a, max_rounds=2)
        if exact is not None:
            return exact
    L = 2.0 * np.linalg.norm(M, 2) ** 2
    if L == 0.0:
        return a
    res = M @ a - b
    obj = res @ res
    for it in range(max_iter):
        if it % 8 == 7:
            # the finish only returns a certified minimiser, so trying it early is safe
            exact = _active_set_finish(M, b, a, max_rounds=3)
            if exact is not None:
                return exact
        grad = 2.0 * M.T @ res
        d = project_simplex(a - grad / L) - a
        Md = M @ d
        dd = Md @ Md
        if dd <= 0.0:
            break
        s = min(1.0, max(0.0, -(res @ Md) / dd))
        a = a + s * d
        res = M @ a - b
        new = res @ res
        improvement = obj - new
        obj = new
        if improvement < tol:
            break
    exact = _active_set_finish(M, b, a)
    if exact is not None:
        r = M @ exact - b
        if r @ r <= obj + 1e-15:
            return exact
    return a


@dataclass(frozen=True)
class HullDistance:
    distance: float
    witness: np.ndarray


def hull_distance(vectors, start=None) -> HullDistance:
    """Distance from the origin to the convex hull of ``vectors``."""
    V = np.array([np.asarray(v, dtype=float) for v in vectors])
    if V.ndim != 2 or V.shape[0] == 0:
        raise ValueError("need a nonempty sequence of vectors")
    alpha = simplex_least_squares(V.T, start=start)
    return HullDistance(float(np.linalg.norm(alpha @ V)), alpha)


# --- sliding selection ------------------------------------------------------


@dataclass(frozen=True)
class SlidingSolution:
    coefficients: np.ndarray
    velocity: np.ndarray
    tangency_residual: float
    objective_weight: float


def closed_form_ratio(grad_f, grad_g, projection: Projection) -> float:
    """Weight on the infeasible-side limit for one active constraint (h = 0).

    r = -<(1-H) grad f, grad g> / <(1-H)(grad g - grad f), grad g>
    """
    pf = projection.project_out(np.asarray(grad_f, dtype=float))
    pg = projection.project_out(np.asarray(grad_g, dtype=float))
    return float(-(pf @ grad_g) / ((pg - pf) @ grad_g))


def _tangent_ratio(v_plus, v_minus, normal):
    """r with <r v_plus + (1-r) v_minus, normal> = 0, or None if degenerate."""
    num = v_minus @ normal
    den = (v_minus - v_plus) @ normal
    if abs(den) < 1e-14:
        return None
    return float(num / den)


def _solution(coeffs, V, normals):
    vel = coeffs @ V
    res = float(np.abs(normals @ vel).max()) if len(normals) else 0.0
    return SlidingSolution(coeffs, vel, res, float(coeffs[-1]))


def sliding_select(generators, active_gradients, projection: Projection | None = None):
    """Convex combination of ``generators`` tangent to every active surface.

    ``generators`` come from a Surface-regime sample, f-generator last;
    ``active_gradients`` are the grad g_i of the active constraints.
    Returns a :class:`SlidingSolution`, or None when no combination is
    tangent (the trajectory crosses the surface instead of sliding).
    Raises QualificationError if ``projection`` is given and the projected
    active gradients are linearly dependent.
    """
    V = np.array([np.asarray(v, dtype=float) for v in generators])
    normals = np.array([np.asarray(g, dtype=float) for g in active_gradients]).reshape(-1, V.shape[1])
    if projection is not None and len(normals):
        pn = projection.project_out(normals)
        if np.linalg.matrix_rank(pn, tol=1e-10) < len(normals):
            raise QualificationError("active constraint gradients are dependent modulo the equality span")
    if len(V) == 1:
        sol = _solution(np.ones(1), V, normals)
        return sol if sol.tangency_residual <= 1e-8 else None
    if len(V) == 2 and len(normals) == 1:
        r = _tangent_ratio(V[0], V[1], normals[0])
        if r is not None:
            if 0.0 <= r < 1.0:
                return _solution(np.array([r, 1.0 - r]), V, normals)
            return None
    W = normals @ V.T  # W[i, q] = <generator q, grad g_i>
    coeffs = simplex_least_squares(W)
    sol = _solution(coeffs, V, normals)
    return sol if sol.tangency_residual <= 1e-8 else None


def equivalent_control(V: np.ndarray, normals: np.ndarray):
    """Coefficients beta (sum 1) making every row of ``normals`` change at one rate.

    Solves <normals_p, beta V> = c for all p together with sum(beta) = 1.
    The f-piece has a zero normal, which forces c = 0 when it takes part.
    Coefficients may be negative; the caller decides what that means.
    """
    k = len(V)
    if k == 1:
        return np.ones(1), float(normals[0] @ V[0])
    if k == 2 and not normals[1].any():
        r = _tangent_ratio(V[0], V[1], normals[0])
        if r is None:
            raise QualificationError("sliding coefficients are undetermined")
        return np.array([r, 1.0 - r]), 0.0
    A = normals @ V.T
    K = np.zeros((k + 1, k + 1))
    K[:k, :k] = A
    K[:k, k] = -1.0
    K[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        raise QualificationError("sliding coefficients are undetermined") from None
    if not np.all(np.isfinite(sol)) or np.linalg.cond(K) > 1e13:
        raise QualificationError("sliding coefficients are undetermined")
    return sol[:k], float(sol[k])


# --- equilibria --------------------------------------------------------------


def equilibrium_witness(s: FieldSample, start=None) -> HullDistance:
    """Distance from 0 to the selected set at ``s`` and the combination attaining it."""
    if len(s.generators) == 1:
        v = s.generators[0] if s.value is None else s.value
        return HullDistance(float(np.linalg.norm(v)), np.ones(1))
    if s.regime is not Regime.SURFACE and s.regime is not Regime.INFEASIBLE:
        return HullDistance(float(np.linalg.norm(s.value)), np.ones(1))
    return hull_distance(s.generators, start=start)


def is_equilibrium(s: FieldSample, tol_eq: float, start=None) -> tuple[bool, float]:
    residual = equilibrium_witness(s, start).distance
    return residual <= tol_eq, residual


def multipliers_from_weights(coefficients, owners, ev, m: int) -> KktCertificate:
    """KKT multipliers from a convex combination of field generators.

    mu_i = alpha_i / alpha for the constraint generators, where alpha is
    the weight on the f-generator; lambda is the least-squares solution of
    grad f + mu grad g + lambda grad h = 0.  Merged generators share their
    weight equally among their owners.
    """
    alpha = 0.0
    mu = np.zeros(m)
    for c, own in zip(coefficients, owners):
        share = float(c) / len(own)
        for o in own:
            if o == OBJECTIVE:
                alpha += share
            else:
                mu[o] += share
    if alpha <= _DEGENERATE_WEIGHT:
        raise DegenerateEquilibrium(
            "degenerate equilibrium: objective weight vanishes (qualification failure)"
        )
    mu /= alpha
    if ev.h.size:
        J = ev.jac_h
        lam = -np.linalg.solve(J @ J.T, J @ (ev.grad_f + mu @ ev.jac_g))
    else:
        lam = np.zeros(0)
    return certificate_from(ev, mu, lam)


def recover_multipliers(solution, problem, x, owners=None) -> KktCertificate:
    """Certificate at ``x`` from a SlidingSolution, HullDistance or weight vector.

    Without ``owners`` the weights are matched to the generators of the
    field sample at ``x`` (active constraints in index order, f last).
    """
    if isinstance(solution, SlidingSolution):
        weights = solution.coefficients
    elif isinstance(solution, HullDistance):
        weights = solution.witness
    else:
        weights = np.asarray(solution, dtype=float)
    ev = problem.evaluate(np.asarray(x, dtype=float))
    if owners is None:
        from .field import sample_from, projection_from_jacobian

        band = 1e-7 * (1 + np.linalg.norm(ev.x))
        owners = sample_from(ev, projection_from_jacobian(ev.jac_h), band, 1e-8 * (1 + abs(ev.G)) if ev.g.size else 1e-8).owners
        if len(owners) != len(weights):
            raise ValueError("weights do not match the generators at x; pass owners explicitly")
    return multipliers_from_weights(weights, owners, ev, problem.m)
