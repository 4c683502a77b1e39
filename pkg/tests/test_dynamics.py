import numpy as np
import pytest

from kktflow.dynamics import (
    IntegratorConfig,
    Status,
    integrate,
    multistart,
    trajectory_csv,
    trajectory_dict,
)
from kktflow.field import Regime
from kktflow.lp import LinearProgram
from kktflow.model import Evaluation, make_problem

PARABOLOID = make_problem(2, "x1^2 + x2^2")
HALF_PLANE = make_problem(2, "(x1 - 1)^2 + (x2 - 1)^2", ["x1 + x2 - 1"])


def test_paraboloid_descends_to_origin():
    tr = integrate(PARABOLOID, [1.0, 1.0])
    assert tr.status is Status.CONVERGED
    np.testing.assert_allclose(tr.x, [0.0, 0.0], atol=1e-7)
    f = np.array([s.f for s in tr.states])
    assert np.all(np.diff(f) <= 0)


def test_half_plane_from_outside():
    tr = integrate(HALF_PLANE, [-2.0, -2.0])
    assert tr.status is Status.CONVERGED
    np.testing.assert_allclose(tr.x, [0.5, 0.5], atol=1e-7)
    np.testing.assert_allclose(tr.certificate.mu, [1.0], atol=1e-6)
    assert tr.certificate.passes(1e-6)


def test_half_plane_from_infeasible_side():
    tr = integrate(HALF_PLANE, [3.0, 2.0])
    assert tr.status is Status.CONVERGED
    np.testing.assert_allclose(tr.x, [0.5, 0.5], atol=1e-7)
    assert any(s.regime is Regime.INFEASIBLE for s in tr.states)


def test_circle_equality():
    p = make_problem(2, "x1 + x2", [], ["x1^2 + x2^2 - 1"])
    tr = integrate(p, [2.0, 0.0])
    r = 2**-0.5
    assert tr.status is Status.CONVERGED
    np.testing.assert_allclose(tr.x, [-r, -r], atol=1e-7)
    np.testing.assert_allclose(tr.certificate.lam, [r], atol=1e-6)
    h2 = np.array([s.normh2 for s in tr.states])
    assert np.all(np.diff(h2) <= 1e-9)


def test_times_strictly_increase():
    tr = integrate(HALF_PLANE, [-2.0, 3.0])
    t = np.array([s.t for s in tr.states])
    assert np.all(np.diff(t) > 0)


def test_sliding_stays_in_band():
    p = make_problem(2, "(x1 - 2)^2 + x2^2", ["x1^2 + x2^2 - 1"])
    tr = integrate(p, [0.0, 0.9])
    assert tr.status is Status.CONVERGED
    np.testing.assert_allclose(tr.x, [1.0, 0.0], atol=1e-7)
    cfg = IntegratorConfig()
    sliding = [s for s in tr.states if len(s.mode) > 1]
    assert sliding
    for s in sliding:
        assert abs(s.G) <= 10 * cfg.band
        grad_f = np.array([2 * (s.x[0] - 2), 2 * s.x[1]])
        assert s.velocity @ grad_f <= 1e-10


def test_leaves_surface_when_multiplier_vanishes():
    # moving target: starting on the circle, f pulls inward so the flow leaves the surface
    p = make_problem(2, "(x1 - 0.2)^2 + x2^2", ["x1^2 + x2^2 - 1"])
    tr = integrate(p, [0.0, 1.0])
    assert tr.status is Status.CONVERGED
    np.testing.assert_allclose(tr.x, [0.2, 0.0], atol=1e-7)
    np.testing.assert_allclose(tr.certificate.mu, [0.0], atol=1e-12)


def test_corner_with_two_active_constraints():
    p = make_problem(2, "(x1 - 2)^2 + (x2 - 2)^2", ["x1 - 1", "x2 - 1"])
    tr = integrate(p, [-1.0, 0.0])
    assert tr.status is Status.CONVERGED
    np.testing.assert_allclose(tr.x, [1.0, 1.0], atol=1e-7)
    np.testing.assert_allclose(tr.certificate.mu, [2.0, 2.0], atol=1e-5)


def test_diverges_on_unbounded_objective():
    tr = integrate(make_problem(1, "-x1"), [0.0], IntegratorConfig(escape_radius=100.0))
    assert tr.status is Status.DIVERGED


def test_max_time():
    tr = integrate(PARABOLOID, [1.0, 1.0], IntegratorConfig(t_max=0.5))
    assert tr.status is Status.MAX_TIME
    assert tr.final.t == pytest.approx(0.5)


def test_domain_error_fails_trajectory():
    tr = integrate(make_problem(1, "log(x1)"), [1.0])
    assert tr.status is Status.FAILED
    assert "DomainError" in tr.reason


def test_domain_error_at_start():
    tr = integrate(make_problem(1, "sqrt(x1)"), [-1.0])
    assert tr.status is Status.FAILED


def test_degenerate_equality_fails():
    tr = integrate(make_problem(2, "x1", [], ["x1^2 + x2^2"]), [0.0, 0.0])
    assert tr.status is Status.FAILED


class _Rotation:
    """Problem-like object whose 'gradient' is a rotation, so the flow circles."""

    n_vars, m, n = 2, 0, 0

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        return Evaluation(x, 0.0, np.array([x[1], -x[0]]), np.zeros(0), np.zeros((0, 2)),
                          np.zeros(0), np.zeros((0, 2)))


def test_cycle_detection():
    tr = integrate(_Rotation(), [1.0, 0.0], IntegratorConfig(step_max=0.05))
    assert tr.status is Status.CYCLE_SUSPECTED
    assert tr.final.t > 2 * np.pi * 0.9


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(step_min=1.0, step_init=0.1)
    with pytest.raises(ValueError):
        IntegratorConfig(band=0.0)
    with pytest.raises(ValueError):
        integrate(PARABOLOID, [np.nan, 0.0])
    with pytest.raises(ValueError):
        integrate(PARABOLOID, [1.0])


def test_multistart_paraboloid_single_equilibrium():
    starts = [[1, 1], [-2, 0.5], [0.3, -3], [2, 2], [-1, -1]]
    res = multistart(PARABOLOID, starts)
    assert len(res.equilibria) == 1
    assert res.equilibria[0].starts == [0, 1, 2, 3, 4]


def test_multistart_double_well():
    res = multistart(make_problem(1, "(x1^2 - 1)^2"), [[2.0], [-2.0]])
    assert sorted(round(e.x[0], 6) for e in res.equilibria) == [-1.0, 1.0]


def test_multistart_lp_unique_vertex():
    lp = LinearProgram.create([1.0, 1.0], B=-np.eye(2), b=[0.0, 0.0])
    res = multistart(lp, [[3, 3], [3, 0.5], [0.5, 3], [4, 1]])
    assert len(res.equilibria) == 1
    np.testing.assert_allclose(res.equilibria[0].x, [0.0, 0.0], atol=1e-9)


def test_multistart_independent_of_workers():
    starts = [[1.5, -2.0], [-2.5, 0.1], [0.2, 2.8], [2.9, 2.9]]
    a = multistart(HALF_PLANE, starts)
    b = multistart(HALF_PLANE, starts, workers=3)
    for ta, tb in zip(a.trajectories, b.trajectories):
        assert trajectory_dict(ta) == trajectory_dict(tb)


def test_export_formats():
    tr = integrate(HALF_PLANE, [-1.0, 0.0])
    lines = trajectory_csv(tr).splitlines()
    assert lines[0] == "t,x1,x2,f,G,normh2,regime,speed"
    assert len(lines) == len(tr.states) + 1
    d = trajectory_dict(tr)
    assert d["status"] == "converged"
    assert d["certificate"]["mu"] == pytest.approx([1.0], abs=1e-6)
    assert d["start_qualification"]["ok"]
