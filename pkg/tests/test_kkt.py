import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kktflow.kkt import is_local_min, kkt_residuals, oracle_enumerate
from kktflow.model import make_problem

HALF_PLANE = make_problem(2, "(x1 - 1)^2 + (x2 - 1)^2", ["x1 + x2 - 1"])


def test_paraboloid_residuals_vanish():
    c = kkt_residuals(make_problem(2, "x1^2 + x2^2"), [0.0, 0.0], [], [])
    assert c.worst == 0.0 and c.passes(0.0)


def test_half_plane_certificate():
    c = kkt_residuals(HALF_PLANE, [0.5, 0.5], [1.0], [])
    assert c.worst == 0.0


def test_missing_multiplier_shows_in_stationarity():
    c = kkt_residuals(HALF_PLANE, [0.5, 0.5], [0.0], [])
    assert c.stationarity_residual == 1.0
    assert not c.passes(1e-3)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        kkt_residuals(HALF_PLANE, [0.5, 0.5], [], [])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2), st.floats(-2, 2), st.floats(-2, 2))
def test_residuals_nonnegative(x, mu, lam):
    p = make_problem(2, "x1*x2", ["x1 - x2^2"], ["x1 + x2"])
    c = kkt_residuals(p, x, [mu], [lam])
    assert min(c.stationarity_residual, c.complementarity_residual, c.ineq_violation,
               c.eq_violation, c.sign_violation) >= 0


def test_oracle_paraboloid():
    pts = oracle_enumerate(make_problem(2, "x1^2 + x2^2"), ([-2, -2], [2, 2]), 5)
    assert len(pts) == 1
    np.testing.assert_allclose(pts[0].x, [0.0, 0.0], atol=1e-12)


def test_oracle_double_well_finds_all_stationary_points():
    pts = oracle_enumerate(make_problem(1, "(x1^2 - 1)^2"), ([-2], [2]), 9)
    np.testing.assert_allclose(sorted(c.x[0] for c in pts), [-1.0, 0.0, 1.0], atol=1e-10)


def test_oracle_half_plane():
    pts = oracle_enumerate(HALF_PLANE, ([-3, -3], [3, 3]), 5)
    assert len(pts) == 1
    np.testing.assert_allclose(pts[0].x, [0.5, 0.5], atol=1e-12)
    np.testing.assert_allclose(pts[0].mu, [1.0], atol=1e-10)


def test_oracle_with_equality():
    p = make_problem(2, "x1 + x2", [], ["x1^2 + x2^2 - 1"])
    pts = oracle_enumerate(p, ([-2, -2], [2, 2]), 5)
    r = 2**-0.5
    np.testing.assert_allclose([c.x for c in pts], [[-r, -r], [r, r]], atol=1e-12)
    for c in pts:
        assert c.passes(1e-10)


def test_local_min_sampling():
    p = make_problem(1, "(x1^2 - 1)^2")
    assert is_local_min(p, [1.0])[0]
    assert not is_local_min(p, [0.0])[0]
    # boundary minimum of a half plane, and a point that is only a KKT point of the reversed sign
    assert is_local_min(HALF_PLANE, [0.5, 0.5])[0]
    q = make_problem(2, "-(x1 - 1)^2 - (x2 - 1)^2", ["x1 + x2 - 1"])
    assert not is_local_min(q, [0.5, 0.5])[0]


def test_local_min_on_manifold():
    p = make_problem(2, "x1 + x2", [], ["x1^2 + x2^2 - 1"])
    r = 2**-0.5
    ok, _, used = is_local_min(p, [-r, -r])
    assert ok and used == 500
    assert not is_local_min(p, [r, r])[0]
