"""Integration of x' = Psi(x) with event handling at switching surfaces.

The field is organised in pieces: the objective piece (switching function
0) and one piece per inequality (switching function g_i).  Off the
surfaces the flow follows the piece whose switching function is largest,
the objective winning ties.  A *mode* is a set of pieces held at a common
level; for two or more pieces the velocity is the convex combination of
their limit values that keeps them tied (the sliding velocity).  Modes
change only at located events: a new piece reaching the common level, or
a sliding coefficient dropping through zero.
"""

from __future__ import annotations

import csv
import enum
import io
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .expr import DomainError
from .field import (
    OBJECTIVE,
    FieldSample,
    QualificationError,
    Regime,
    classify,
    projection_from_jacobian,
    sample_from,
)
from .filippov import (
    DegenerateEquilibrium,
    equilibrium_witness,
    equivalent_control,
    multipliers_from_weights,
)
from .kkt import KktCertificate
from .model import QualificationReport, qualifications_from

log = logging.getLogger("kktflow")


class Status(str, enum.Enum):
    CONVERGED = "converged"
    DIVERGED = "diverged"
    MAX_TIME = "max_time"
    CYCLE_SUSPECTED = "cycle_suspected"
    FAILED = "failed"


@dataclass(frozen=True)
class IntegratorConfig:
    """Step control and stopping rules.

    ``band``, ``tol_act`` and ``tol_eq`` are relative: the thresholds used
    at x are band*(1+|x|), tol_act*(1+|G|) and tol_eq*(1+|grad f|).
    """

    step_init: float = 1e-2
    step_min: float = 1e-12
    step_max: float = 10.0
    band: float = 1e-7
    tol_act: float = 1e-8
    tol_eq: float = 1e-8
    t_max: float = 1e4
    escape_radius: float = 1e6
    event_refine_tol: float = 1e-10
    rtol: float = 1e-8
    atol: float = 1e-10
    max_steps: int = 500_000
    confirm_steps: int = 3
    cycle_radius: float = 1e-6
    max_stalled_events: int = 50

    def __post_init__(self):
        for name in ("step_init", "step_min", "step_max", "band", "tol_act", "tol_eq",
                     "t_max", "escape_radius", "event_refine_tol", "rtol", "atol"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite")
        if self.step_min > self.step_init or self.step_init > self.step_max:
            raise ValueError("need step_min <= step_init <= step_max")

    def refined(self, factor: float = 0.5) -> IntegratorConfig:
        """Same configuration with all accuracy tolerances scaled by ``factor``."""
        return replace(
            self,
            band=self.band * factor,
            tol_act=self.tol_act * factor,
            tol_eq=self.tol_eq * factor,
            rtol=self.rtol * factor,
            atol=self.atol * factor,
            event_refine_tol=self.event_refine_tol * factor,
        )


@dataclass(frozen=True)
class TrajectoryState:
    t: float
    x: np.ndarray
    regime: Regime
    f: float
    G: float
    normh2: float
    speed: float
    velocity: np.ndarray
    mode: tuple[int, ...]


@dataclass
class Trajectory:
    x0: np.ndarray
    states: list[TrajectoryState]
    status: Status
    reason: str = ""
    certificate: KktCertificate | None = None
    equilibrium_residual: float | None = None
    start_qualification: QualificationReport | None = None
    end_qualification: QualificationReport | None = None
    accepted_steps: int = 0
    rejected_steps: int = 0
    events: int = 0

    @property
    def final(self) -> TrajectoryState:
        return self.states[-1]

    @property
    def x(self) -> np.ndarray:
        return self.states[-1].x


# --- Dormand-Prince 5(4) coefficients ----------------------------------------

_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_A_ROWS = [np.array(row, dtype=float) for row in _A]
_E = np.array([
    35 / 384 - 5179 / 57600, 0, 500 / 1113 - 7571 / 16695, 125 / 192 - 393 / 640,
    -2187 / 6784 + 92097 / 339200, 11 / 84 - 187 / 2100, -1 / 40,
])


def _hermite(x0, v0, x1, v1, dt, theta):
    t2, t3 = theta * theta, theta * theta * theta
    return ((2 * t3 - 3 * t2 + 1) * x0 + (t3 - 2 * t2 + theta) * dt * v0
            + (-2 * t3 + 3 * t2) * x1 + (t3 - t2) * dt * v1)


# --- mode evaluation ----------------------------------------------------------


@dataclass
class _ModeEval:
    x: np.ndarray
    ev: object
    proj: object
    mode: tuple[int, ...]
    velocity: np.ndarray
    beta: np.ndarray
    rate: float
    pieces: np.ndarray  # rows: limit value of every piece (constraints, then f)


_ONE = np.ones(1)
_ONE.flags.writeable = False


class _System:
    def __init__(self, problem):
        self.p = problem
        self.m = problem.m
        self._proj = getattr(problem, "constant_projection", None)
        # affine equalities have a constant Jacobian, so H is computed once
        eqs = getattr(problem, "equalities", None)
        self._constant_h = self._proj is not None or (eqs is not None and all(e.is_affine for e in eqs))

    def evaluate(self, x):
        ev = self.p.evaluate(x)
        proj = self._proj
        if proj is None:
            proj = projection_from_jacobian(ev.jac_h)
            if self._constant_h:
                self._proj = proj
        return ev, proj

    def phi(self, ev, q):
        return 0.0 if q == OBJECTIVE else float(ev.g[q])

    def normal(self, ev, q):
        return np.zeros(len(ev.x)) if q == OBJECTIVE else ev.jac_g[q]

    def limit_values(self, ev, proj):
        r = ev.jac_h.T @ ev.h if ev.h.size else 0.0
        rows = np.vstack([ev.jac_g, ev.grad_f[None, :]])
        return -r - proj.project_out(rows)

    def piece_row(self, q):
        return self.m if q == OBJECTIVE else q

    def mode_eval(self, x, mode, ev=None, proj=None) -> _ModeEval:
        if ev is None:
            ev, proj = self.evaluate(x)
        V_all = self.limit_values(ev, proj)
        if len(mode) == 1:
            q = mode[0]
            v = V_all[self.piece_row(q)]
            return _ModeEval(ev.x, ev, proj, mode, v, _ONE, float(self.normal(ev, q) @ v), V_all)
        V = V_all[[self.piece_row(q) for q in mode]]
        normals = np.array([self.normal(ev, q) for q in mode])
        beta, rate = equivalent_control(V, normals)
        return _ModeEval(ev.x, ev, proj, mode, beta @ V, beta, rate, V_all)


def _ordered(mode):
    """Constraint pieces first, objective last (matches the field sample order)."""
    return tuple(sorted(q for q in mode if q != OBJECTIVE)) + ((OBJECTIVE,) if OBJECTIVE in mode else ())


class _Integrator:
    def __init__(self, problem, cfg: IntegratorConfig):
        self.sys = _System(problem)
        self.p = problem
        self.cfg = cfg
        self.m = problem.m
        self.pieces = list(range(self.m)) + ([OBJECTIVE] if self.m else [])

    # thresholds at a point
    def band_at(self, x):
        return self.cfg.band * (1.0 + float(np.linalg.norm(x)))

    def tol_eq_at(self, ev):
        return self.cfg.tol_eq * (1.0 + float(np.linalg.norm(ev.grad_f)))

    # -- mode selection -------------------------------------------------------

    def candidates(self, ev, extra=()):
        if not self.m:
            return [OBJECTIVE]
        top = max(0.0, ev.G)
        tol = self.band_at(ev.x)
        out = {q for q in self.pieces if self.sys.phi(ev, q) >= top - tol}
        out.update(extra)
        return sorted(out, key=lambda q: (q == OBJECTIVE, q))

    def select_mode(self, x, extra=()):
        ev, proj = self.sys.evaluate(x)
        cand = self.candidates(ev, extra)
        if len(cand) == 1:
            return self.sys.mode_eval(x, (cand[0],), ev, proj)
        best, best_score = None, math.inf
        for size in range(1, len(cand) + 1):
            for mode in itertools.combinations(cand, size):
                mode = _ordered(mode)
                try:
                    me = self.sys.mode_eval(x, mode, ev, proj)
                except QualificationError:
                    continue
                scale = 1.0 + float(np.linalg.norm(me.velocity))
                viol = max(0.0, -float(me.beta.min()))
                for q in cand:
                    if q in mode:
                        continue
                    psi = float(self.sys.normal(ev, q) @ me.velocity)
                    viol = max(viol, (psi - me.rate) / (scale * (1.0 + np.linalg.norm(self.sys.normal(ev, q)))))
                if viol <= 1e-12:
                    return me
                if viol < best_score:
                    best, best_score = me, viol
            # minimal support: stop at the first size that admits a valid mode
        if best is None:
            raise QualificationError("no admissible mode at a switching point")
        log.debug("no consistent mode at x=%s; using least-violating %s (%.3g)", x, best.mode, best_score)
        return best

    def land(self, me: _ModeEval, iters=1) -> _ModeEval:
        """Newton correction of x onto the stratum where the mode's pieces tie."""
        if len(me.mode) < 2:
            return me
        for _ in range(iters):
            ref = me.mode[-1]
            others = me.mode[:-1]
            ev = me.ev
            c = np.array([self.sys.phi(ev, q) - self.sys.phi(ev, ref) for q in others])
            J = np.array([self.sys.normal(ev, q) - self.sys.normal(ev, ref) for q in others])
            PJt = me.proj.project_out(J).T
            K = J @ PJt
            try:
                if np.linalg.cond(K) > 1e12:
                    raise np.linalg.LinAlgError
                delta = -PJt @ np.linalg.solve(K, c)
            except np.linalg.LinAlgError:
                raise QualificationError("switching surfaces are not transversal") from None
            me = self.sys.mode_eval(me.x + delta, me.mode)
        return me

    # -- events -----------------------------------------------------------------

    def event_values(self, me: _ModeEval):
        """Values whose upward crossing of a threshold ends the current mode."""
        ev = me.ev
        ref = me.mode[-1]
        phi_ref = self.sys.phi(ev, ref)
        keys, vals = [], []
        for q in self.pieces:
            if q not in me.mode:
                keys.append(("enter", q))
                vals.append(self.sys.phi(ev, q) - phi_ref)
        if len(me.mode) > 1:
            for q, b in zip(me.mode, me.beta):
                keys.append(("leave", q))
                vals.append(-float(b))
        return keys, np.array(vals)

    def thresholds(self, me, vals):
        band = 0.1 * self.band_at(me.x)
        keys, _ = self.event_values(me)
        out = np.empty(len(vals))
        for k, ((kind, _), v) in enumerate(zip(keys, vals)):
            slack = band if kind == "enter" else 1e-9
            out[k] = 0.0 if v < 0 else v + slack
        return out

    # -- main loop --------------------------------------------------------------

    def record(self, me: _ModeEval):
        ev = me.ev
        G = ev.G
        reg = classify(G, self.band_at(me.x), self.m > 0)
        return TrajectoryState(
            t=self.t, x=me.x.copy(), regime=reg, f=ev.f, G=G, normh2=ev.normh2,
            speed=float(np.linalg.norm(me.velocity)), velocity=me.velocity.copy(), mode=me.mode,
        )

    def stage_eval(self, x, mode):
        # overflow in a trial stage only rejects the step, so numpy need not warn
        with np.errstate(over="ignore", invalid="ignore"):
            me = self.sys.mode_eval(x, mode)
        if not np.all(np.isfinite(me.velocity)):
            raise DomainError("non-finite field value")
        return me

    def equilibrium_check(self, me: _ModeEval):
        ev = me.ev
        tol = self.tol_eq_at(ev)
        band = self.band_at(me.x)
        s = sample_from(ev, me.proj, band, self.cfg.tol_act * (1.0 + abs(ev.G) if ev.g.size else 1.0))
        speed = float(np.linalg.norm(me.velocity))
        if len(s.generators) > 1 and speed > 0:
            # <v_k, u> > tol for every generator separates the hull from 0
            u = me.velocity / speed
            if min(float(v @ u) for v in s.generators) > tol:
                return s, None, False
        start = self.witness_start if self.witness_start is not None and len(self.witness_start) == len(s.generators) else None
        w = equilibrium_witness(s, start)
        self.witness_start = w.witness
        return s, w, w.distance <= tol

    def run(self, x0) -> Trajectory:
        cfg = self.cfg
        x0 = np.asarray(x0, dtype=float)
        self.t = 0.0
        self.witness_start = None
        traj = Trajectory(x0=x0.copy(), states=[], status=Status.FAILED)
        try:
            ev0, _ = self.sys.evaluate(x0)
            traj.start_qualification = qualifications_from(ev0)
            me = self.select_mode(x0)
            me = self.land(me, iters=3)
        except (DomainError, QualificationError, ArithmeticError) as err:
            traj.reason = f"{type(err).__name__}: {err}"
            traj.states.append(_bare_state(x0))
            return traj
        traj.states.append(self.record(me))
        dt = cfg.step_init
        streak = 0
        stalled = 0
        history = _PathHistory(me.x, me.velocity, cfg)

        def finish(status, reason=""):
            traj.status = status
            traj.reason = reason
            try:
                traj.end_qualification = qualifications_from(me.ev)
            except Exception:  # noqa: BLE001 - report is best-effort
                traj.end_qualification = None
            return traj

        for _ in range(cfg.max_steps):
            if self.t >= cfg.t_max:
                return finish(Status.MAX_TIME, f"reached t = {self.t:.6g}")
            h = min(dt, cfg.t_max - self.t)
            keys, e0 = self.event_values(me)
            thr = self.thresholds(me, e0)
            # one Dormand-Prince step in the current mode
            K = np.empty((7, len(me.x)))
            K[0] = me.velocity
            try:
                for i in range(1, 7):
                    xi = me.x + h * (_A_ROWS[i] @ K[:i])
                    if i == 5:
                        x6 = xi
                    last = self.stage_eval(xi, me.mode)
                    K[i] = last.velocity
            except (DomainError, QualificationError, ArithmeticError) as err:
                traj.rejected_steps += 1
                dt = h * 0.25
                if dt < cfg.step_min:
                    return finish(Status.FAILED, f"{type(err).__name__}: {err}")
                continue
            x5 = last.x
            errv = h * (_E @ K)
            sc = cfg.atol + cfg.rtol * np.maximum(np.abs(me.x), np.abs(x5))
            err = float(np.sqrt(np.mean((errv / sc) ** 2)))
            if not math.isfinite(err) or err > 1.0:
                traj.rejected_steps += 1
                fac = 0.2 if not math.isfinite(err) else max(0.2, 0.9 * err ** -0.2)
                dt = h * fac
                if dt < cfg.step_min:
                    return finish(Status.FAILED, "step size underflow")
                continue
            traj.accepted_steps += 1
            grow = 10.0 if err == 0 else min(10.0, max(0.2, 0.9 * err ** -0.2))
            dt = min(cfg.step_max, max(cfg.step_min, h * grow))
            # local Lipschitz estimate from the last two stages keeps h inside the
            # real stability interval, which otherwise sets a noise floor near equilibria
            dx = float(np.linalg.norm(x5 - x6))
            if dx > 0:
                lip = float(np.linalg.norm(K[6] - K[5])) / dx
                if lip > 0:
                    dt = max(cfg.step_min, min(dt, 2.0 / lip))

            _, e1 = self.event_values(last)
            hit = e1 > thr
            try:
                if hit.any():
                    traj.events += 1
                    lo, hi = 0.0, 1.0
                    me_hi, hit_hi = last, hit
                    while (hi - lo) * h > cfg.event_refine_tol:
                        mid = 0.5 * (lo + hi)
                        xm = _hermite(me.x, K[0], x5, K[6], h, mid)
                        mm = self.stage_eval(xm, me.mode)
                        _, em = self.event_values(mm)
                        hm = em > thr
                        if hm.any():
                            hi, me_hi, hit_hi = mid, mm, hm
                        else:
                            lo = mid
                    stalled = stalled + 1 if hi * h <= 1e-14 * (1 + self.t) else 0
                    if stalled > cfg.max_stalled_events:
                        return finish(Status.FAILED, "event chattering without progress")
                    self.t += hi * h
                    extra = [q for (kind, q), fired in zip(keys, hit_hi) if fired and kind == "enter"]
                    me = self.select_mode(me_hi.x, extra=list(me.mode) + extra)
                    me = self.land(me, iters=3)
                    self.witness_start = None
                    dt = max(cfg.step_init, hi * h) if hi * h > 0 else cfg.step_init
                else:
                    stalled = 0
                    self.t += h
                    me = self.land(last) if len(last.mode) > 1 else last
            except (DomainError, QualificationError, ArithmeticError) as err:
                return finish(Status.FAILED, f"{type(err).__name__}: {err}")

            state = self.record(me)
            traj.states.append(state)
            nx = float(np.linalg.norm(me.x))
            if not math.isfinite(nx) or nx > cfg.escape_radius:
                return finish(Status.DIVERGED, f"|x| = {nx:.6g} exceeds {cfg.escape_radius:.6g}")

            s, w, eq = self.equilibrium_check(me)
            if eq and s.regime is not Regime.INFEASIBLE:
                streak += 1
            else:
                streak = 0
            if streak >= cfg.confirm_steps:
                traj.equilibrium_residual = w.distance
                try:
                    traj.certificate = multipliers_from_weights(w.witness, s.owners, me.ev, self.m)
                except DegenerateEquilibrium as err:
                    return finish(Status.FAILED, str(err))
                except np.linalg.LinAlgError:
                    return finish(Status.FAILED, "equality Gram matrix is singular")
                return finish(Status.CONVERGED, f"equilibrium residual {w.distance:.3g}")

            if history.returned(me.x, me.velocity, self.t, state.speed > self.tol_eq_at(me.ev)):
                return finish(Status.CYCLE_SUSPECTED, "trajectory returned to an earlier state")
        return finish(Status.MAX_TIME, "step budget exhausted")


class _PathHistory:
    """Recorded path as a polyline, for detecting a return to earlier states.

    A new point counts as a return when it lies within ``cycle_radius``
    (plus the chord's own curvature sag) of a segment recorded more than
    10 initial steps earlier, after travelling well away from it.
    """

    def __init__(self, x, v, cfg):
        self.cfg = cfg
        self.k = 1
        self.X = np.empty((64, len(x)))
        self.V = np.empty((64, len(x)))
        self.T = np.empty(64)
        self.arc = np.empty(64)
        self.X[0], self.V[0], self.T[0], self.arc[0] = x, v, 0.0, 0.0

    def _append(self, x, v, t):
        k = self.k
        if k == len(self.T):
            self.X, self.V = (np.concatenate([a, np.empty_like(a)]) for a in (self.X, self.V))
            self.T, self.arc = (np.concatenate([a, np.empty_like(a)]) for a in (self.T, self.arc))
        self.arc[k] = self.arc[k - 1] + float(np.linalg.norm(x - self.X[k - 1]))
        self.X[k], self.V[k], self.T[k] = x, v, t
        self.k = k + 1

    def returned(self, x, v, t, moving) -> bool:
        cfg = self.cfg
        self._append(x, v, t)
        k = self.k
        # a closed orbit keeps retracing its path, so testing every 4th point suffices
        if not moving or k < 4 or k % 4:
            return False
        # segments [j, j+1] with j+1 < k-1, far enough back in time and in arc length
        T, arc = self.T[:k], self.arc[:k]
        old = np.flatnonzero((t - T[1:k - 1] > 10 * cfg.step_init)
                             & (arc[k - 1] - arc[1:k - 1] > 100 * cfg.cycle_radius))
        if not old.size:
            return False
        P, Q = self.X[old], self.X[old + 1]
        D = Q - P
        dd = np.einsum("ij,ij->i", D, D)
        s = np.clip(np.einsum("ij,ij->i", x - P, D) / np.where(dd > 0, dd, 1.0), 0.0, 1.0)
        dist = np.linalg.norm(P + s[:, None] * D - x, axis=1)
        dt = (T[old + 1] - T[old])[:, None]
        sag = 0.25 * np.linalg.norm(D - dt * self.V[old], axis=1)
        return bool(np.any(dist <= cfg.cycle_radius + sag))


def _bare_state(x):
    return TrajectoryState(0.0, x.copy(), Regime.NO_INEQUALITIES, math.nan, math.nan, math.nan,
                           math.nan, np.full(len(x), math.nan), ())


def integrate(problem, x0, config: IntegratorConfig | None = None) -> Trajectory:
    """Follow x' = Psi(x) from ``x0`` until a stopping rule fires."""
    cfg = config or IntegratorConfig()
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (problem.n_vars,):
        raise ValueError(f"start point must have {problem.n_vars} components")
    if not np.all(np.isfinite(x0)):
        raise ValueError("start point must be finite")
    return _Integrator(problem, cfg).run(x0)


# --- multistart ---------------------------------------------------------------


@dataclass
class Equilibrium:
    x: np.ndarray
    certificate: KktCertificate
    starts: list[int] = field(default_factory=list)


@dataclass
class MultistartResult:
    trajectories: list[Trajectory]
    equilibria: list[Equilibrium]


def multistart(problem, starts, config: IntegratorConfig | None = None, workers: int | None = None,
               dedupe: float = 1e-5) -> MultistartResult:
    """Integrate from every start; converged end points are merged within ``dedupe``.

    Results are merged in start order, so the output does not depend on
    ``workers``.
    """
    starts = [np.asarray(s, dtype=float) for s in starts]
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trajs = list(pool.map(lambda s: integrate(problem, s, config), starts))
    else:
        trajs = [integrate(problem, s, config) for s in starts]
    eqs: list[Equilibrium] = []
    for k, tr in enumerate(trajs):
        if tr.status is not Status.CONVERGED:
            continue
        hit = next((e for e in eqs if np.linalg.norm(e.x - tr.x) <= dedupe), None)
        if hit is None:
            eqs.append(Equilibrium(tr.x.copy(), tr.certificate, [k]))
        else:
            hit.starts.append(k)
    return MultistartResult(trajs, eqs)


def grid_starts(lo, hi, count: int, n_vars: int) -> list[np.ndarray]:
    axes = [np.linspace(lo, hi, count)] * n_vars
    return [np.array(p) for p in itertools.product(*axes)]


def random_starts(seed: int, count: int, n_vars: int, lo=-3.0, hi=3.0) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    return list(rng.uniform(lo, hi, size=(count, n_vars)))


# --- export -------------------------------------------------------------------


def _g17(v) -> str:
    v = float(v)
    return format(v + 0.0, ".17g") if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))


def trajectory_csv(traj: Trajectory) -> str:
    """Columns: t, x1..xN, f, G, normh2, regime, speed (17 significant digits)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    N = len(traj.x0)
    w.writerow(["t", *[f"x{k + 1}" for k in range(N)], "f", "G", "normh2", "regime", "speed"])
    for s in traj.states:
        w.writerow([_g17(s.t), *[_g17(v) for v in s.x], _g17(s.f), _g17(s.G), _g17(s.normh2),
                    s.regime.value, _g17(s.speed)])
    return buf.getvalue()


def trajectory_dict(traj: Trajectory) -> dict:
    return {
        "x0": [float(v) for v in traj.x0],
        "status": traj.status.value,
        "reason": traj.reason,
        "x": [float(v) for v in traj.x],
        "t": traj.final.t,
        "f": traj.final.f,
        "equilibrium_residual": traj.equilibrium_residual,
        "certificate": traj.certificate.to_dict() if traj.certificate else None,
        "accepted_steps": traj.accepted_steps,
        "rejected_steps": traj.rejected_steps,
        "events": traj.events,
        "start_qualification": traj.start_qualification.to_dict() if traj.start_qualification else None,
        "end_qualification": traj.end_qualification.to_dict() if traj.end_qualification else None,
    }


__all__ = [
    "Equilibrium", "FieldSample", "IntegratorConfig", "MultistartResult", "Status", "Trajectory",
    "TrajectoryState", "grid_starts", "integrate", "multistart", "random_starts", "trajectory_csv",
    "trajectory_dict",
]
