import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from saferecovery.sets import (
    QuadraticSet,
    SetError,
    SetFamily,
    boundary_distance,
    h_gradient,
    h_value,
    member_hat_x0,
    membership,
    nearest_boundary_point,
    verify_barrier_inclusion,
)

M = np.array([[1.0, 1.0], [1.0, 2.0]])
S = QuadraticSet.sublevel(M, 35.0)
BAR = QuadraticSet.sublevel(M, 12.5)
FAM = SetFamily(S, 2.01, 0.55, BAR)
pts = arrays(np.float64, 2, elements=st.floats(-6, 6))


def test_values_at_initial_conditions():
    assert h_value(S, [5.3, -2.4]) == pytest.approx(28.09 - 25.44 + 11.52 - 35.0)
    assert h_value(BAR, [4.9, -2.1]) == pytest.approx(-0.25)
    assert h_value(BAR, [5.3, -2.4]) == pytest.approx(1.67)  # x0 itself lies outside Xbar


def test_memberships():
    assert membership(FAM, "X0", [5.3, -2.4])
    assert membership(FAM, "Xbar", [4.9, -2.1])
    assert member_hat_x0([5.3, -2.4], [4.9, -2.1], 0.55)
    assert not member_hat_x0([5.3, -2.4], [4.0, -2.1], 0.55)
    assert not membership(FAM, "S", [10.0, 0.0])
    assert membership(FAM, "Xtilde", [0.0, 0.0])
    with pytest.raises(SetError):
        membership(FAM, "Y", [0.0, 0.0])


def test_barrier_inside_xtilde():
    rep = verify_barrier_inclusion(FAM)
    assert rep.included and not rep.probabilistic and rep.worst_deficit < 0


def test_barrier_not_inside_when_too_large():
    rep = verify_barrier_inclusion(SetFamily(S, 2.01, 0.55, QuadraticSet.sublevel(M, 30.0)))
    assert not rep.included and rep.witness is not None


def test_invalid_sets():
    with pytest.raises(SetError):
        QuadraticSet(np.array([[1.0, 2.0], [0.0, 1.0]]), None, -1.0)
    with pytest.raises(SetError):
        QuadraticSet(np.eye(2), np.zeros(3), -1.0)
    with pytest.raises(SetError):
        QuadraticSet(np.eye(2), None, 1.0).ellipsoid()


def test_margin_condition():
    fam = FAM.with_bound_factor(2.578)
    assert fam.required_epsilon == pytest.approx(3.578 * 0.55)
    assert fam.margin_ok
    with pytest.warns(UserWarning):
        SetFamily(S, 1.0, 0.55, BAR, bound_factor=2.578)


@given(pts)
def test_gradient_matches_central_differences(x):
    q = QuadraticSet(M, np.array([0.3, -0.7]), -4.0)
    h = 1e-6
    num = [(q.value(x + h * e) - q.value(x - h * e)) / (2 * h) for e in np.eye(2)]
    np.testing.assert_allclose(h_gradient(q, x), num, atol=1e-5)


@given(pts)
def test_nearest_boundary_point_is_on_boundary_and_closest(x):
    p = nearest_boundary_point(S, x)
    assert abs(S.value(p)) <= 1e-8 * 35
    d = boundary_distance(S, x)
    assert d == pytest.approx(np.linalg.norm(p - x), abs=1e-9)
    # no sampled boundary point is closer
    th = np.linspace(0, 2 * np.pi, 720, endpoint=False)
    _, rho, w, v = S.ellipsoid()
    circ = np.column_stack([np.cos(th), np.sin(th)])
    bnd = (circ / np.sqrt(w) * np.sqrt(rho)) @ v.T
    assert d <= np.min(np.linalg.norm(bnd - x, axis=1)) + 1e-9
