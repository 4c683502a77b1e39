"""KKT residuals and a brute-force enumeration oracle for small problems."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .expr import DomainError
from .model import Evaluation, Problem


@dataclass(frozen=True)
class KktCertificate:
    x: np.ndarray
    mu: np.ndarray
    lam: np.ndarray
    stationarity_residual: float
    complementarity_residual: float
    ineq_violation: float
    eq_violation: float
    sign_violation: float

    @property
    def feasibility(self) -> tuple[float, float]:
        return self.ineq_violation, self.eq_violation

    @property
    def worst(self) -> float:
        return max(
            self.stationarity_residual,
            self.complementarity_residual,
            self.ineq_violation,
            self.eq_violation,
            self.sign_violation,
        )

    def passes(self, tol: float) -> bool:
        return self.worst <= tol

    def to_dict(self) -> dict:
        return {
            "x": [float(v) for v in self.x],
            "mu": [float(v) for v in self.mu],
            "lambda": [float(v) for v in self.lam],
            "stationarity_residual": self.stationarity_residual,
            "complementarity_residual": self.complementarity_residual,
            "ineq_violation": self.ineq_violation,
            "eq_violation": self.eq_violation,
            "sign_violation": self.sign_violation,
        }


def certificate_from(ev: Evaluation, mu, lam) -> KktCertificate:
    mu = np.asarray(mu, dtype=float).reshape(ev.g.shape)
    lam = np.asarray(lam, dtype=float).reshape(ev.h.shape)
    grad_l = ev.grad_f + mu @ ev.jac_g + lam @ ev.jac_h
    return KktCertificate(
        x=np.array(ev.x, dtype=float),
        mu=mu,
        lam=lam,
        stationarity_residual=float(np.abs(grad_l).max()),
        complementarity_residual=float(np.abs(mu * ev.g).max()) if mu.size else 0.0,
        ineq_violation=max(0.0, float(ev.g.max())) if ev.g.size else 0.0,
        eq_violation=float(np.abs(ev.h).max()) if ev.h.size else 0.0,
        sign_violation=max(0.0, -float(mu.min())) if mu.size else 0.0,
    )


def kkt_residuals(p, x, mu, lam) -> KktCertificate:
    x = np.asarray(x, dtype=float)
    if len(x) != p.n_vars or len(mu) != p.m or len(lam) != p.n:
        raise ValueError("dimension mismatch between problem and (x, mu, lambda)")
    return certificate_from(p.evaluate(x), mu, lam)


# --- enumeration oracle -------------------------------------------------------


def _lagrangian_gradient(p, x, S, mu_s, lam):
    ev = p.evaluate(x)
    return ev.grad_f + mu_s @ ev.jac_g[S] + lam @ ev.jac_h, ev


def _residual(p, z, S, N):
    x, mu_s, lam = z[:N], z[N : N + len(S)], z[N + len(S) :]
    grad_l, ev = _lagrangian_gradient(p, x, S, mu_s, lam)
    return np.concatenate([grad_l, ev.g[S], ev.h]), ev


def _jacobian(p, z, S, N, ev, step=1e-6):
    x, mu_s, lam = z[:N], z[N : N + len(S)], z[N + len(S) :]
    hess = np.empty((N, N))
    for k in range(N):
        e = np.zeros(N)
        e[k] = step * (1.0 + abs(x[k]))
        up, _ = _lagrangian_gradient(p, x + e, S, mu_s, lam)
        down, _ = _lagrangian_gradient(p, x - e, S, mu_s, lam)
        hess[:, k] = (up - down) / (2 * e[k])
    hess = 0.5 * (hess + hess.T)
    A = np.vstack([ev.jac_g[S], ev.jac_h])
    k = A.shape[0]
    return np.block([[hess, A.T], [A, np.zeros((k, k))]])


def _newton(p, x0, S, iters, tol):
    N = p.n_vars
    try:
        ev = p.evaluate(x0)
    except DomainError:
        return None
    A = np.vstack([ev.jac_g[S], ev.jac_h])
    mult = -np.linalg.lstsq(A.T, ev.grad_f, rcond=None)[0] if A.shape[0] else np.zeros(0)
    z = np.concatenate([x0, mult])
    try:
        F, ev = _residual(p, z, S, N)
        for _ in range(iters):
            norm = np.abs(F).max()
            if norm <= tol * (1.0 + np.abs(ev.grad_f).max()):
                return z
            J = _jacobian(p, z, S, N, ev)
            try:
                dz = np.linalg.solve(J, -F)
            except np.linalg.LinAlgError:
                return None
            t = 1.0
            while True:
                try:
                    F_new, ev_new = _residual(p, z + t * dz, S, N)
                    if np.abs(F_new).max() < (1 - 1e-4 * t) * norm or t < 1e-3:
                        break
                except DomainError:
                    pass
                t *= 0.5
                if t < 1e-3:
                    return None
            z = z + t * dz
            F, ev = F_new, ev_new
        if np.abs(F).max() <= tol * (1.0 + np.abs(ev.grad_f).max()):
            return z
    except DomainError:
        return None
    return None


def _lattice(box, grid, N):
    lo, hi = box
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (N,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (N,))
    axes = [np.linspace(lo[k], hi[k], grid) for k in range(N)]
    for point in itertools.product(*axes):
        yield np.array(point)


def oracle_enumerate(
    p: Problem,
    box,
    grid: int = 5,
    newton_iters: int = 50,
    tol: float = 1e-11,
    dedupe: float = 1e-6,
) -> list[KktCertificate]:
    """All KKT points reachable by Newton from a lattice of starts.

    For each subset S of inequalities treated as equalities, the square
    system  grad f + mu_S grad g_S + lambda grad h = 0,  g_S = 0,  h = 0
    is solved from every lattice point; solutions with mu_S >= -1e-8 and
    g <= 1e-8 elsewhere are kept.  Subsets with |S| + n > N are skipped
    since their gradients cannot be linearly independent.
    """
    N, m, n = p.n_vars, p.m, p.n
    found: list[KktCertificate] = []
    starts = list(_lattice(box, grid, N))
    for size in range(m + 1):
        if size + n > N:
            break
        for S in itertools.combinations(range(m), size):
            S = list(S)
            for x0 in starts:
                z = _newton(p, x0, S, newton_iters, tol)
                if z is None:
                    continue
                x, mu_s, lam = z[:N], z[N : N + size], z[N + size :]
                if mu_s.size and mu_s.min() < -1e-8:
                    continue
                ev = p.evaluate(x)
                off = [i for i in range(m) if i not in S]
                if off and ev.g[off].max() > 1e-8:
                    continue
                mu = np.zeros(m)
                mu[S] = mu_s
                cert = _certificate_clean(ev, mu, lam)
                dup = next((k for k, c in enumerate(found) if np.linalg.norm(c.x - x) <= dedupe), None)
                if dup is None:
                    found.append(cert)
                elif cert.worst < found[dup].worst:
                    found[dup] = cert
    found.sort(key=lambda c: tuple(np.round(c.x, 8)))
    return found


def _certificate_clean(ev, mu, lam):
    return certificate_from(ev, np.where(np.abs(mu) < 1e-14, 0.0, mu), lam)


# --- local minimality by sampling ----------------------------------------------


def _restore_equalities(p, x, iters=30, tol=1e-13):
    for _ in range(iters):
        ev = p.evaluate(x)
        if not ev.h.size or np.abs(ev.h).max() <= tol:
            return x, ev
        J = ev.jac_h
        x = x - J.T @ np.linalg.solve(J @ J.T, ev.h)
    ev = p.evaluate(x)
    return x, ev


def is_local_min(
    p,
    x,
    radius: float = 1e-3,
    samples: int = 500,
    seed: int = 0,
    rel_tol: float = 1e-8,
) -> tuple[bool, float, int]:
    """Compare f(x) with f at random feasible points within ``radius``.

    Returns (ok, worst decrease found, number of feasible samples used).
    Points are drawn uniformly in the ball, pulled back onto h = 0 by
    Gauss-Newton, and discarded if any g > 0 afterwards.
    """
    rng = np.random.default_rng(seed)
    x = np.asarray(x, dtype=float)
    N = len(x)
    f0 = p.evaluate(x).f
    tol = rel_tol * (1.0 + abs(f0))
    worst = 0.0
    used = 0
    attempts = 0
    while used < samples and attempts < 40 * samples:
        attempts += 1
        d = rng.normal(size=N)
        d *= radius * rng.uniform() ** (1.0 / N) / np.linalg.norm(d)
        try:
            y, ev = _restore_equalities(p, x + d)
        except (DomainError, np.linalg.LinAlgError):
            continue
        if ev.h.size and np.abs(ev.h).max() > 1e-10:
            continue
        if ev.g.size and ev.g.max() > 0.0:
            continue
        if np.linalg.norm(y - x) > 2 * radius:
            continue
        used += 1
        worst = max(worst, f0 - ev.f)
    return worst <= tol and used > 0, worst, used
