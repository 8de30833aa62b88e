import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from saferecovery.plant import (
    LtiPlant,
    PlantError,
    check_structural_assumptions,
    controllability_matrix,
    observability_matrix,
)


def plant2d(a=((0.5, 1.0), (0.0, 0.0))):
    return LtiPlant(np.array(a), np.array([[0.0], [1.0]]), np.eye(2), (1,))


@pytest.mark.parametrize("a", [((0.0, 1.0), (0.0, 0.0)), ((0.5, 1.0), (0.0, 0.0))])
def test_structural_report_two_state(a):
    rep = check_structural_assumptions(plant2d(a))
    assert rep.controllable and rep.detectable and rep.observable_full
    # O(C_s, A) = [[0, 1], [0, 0]]
    assert rep.rank_obs_secured == 1


def test_undetectable_plant():
    p = LtiPlant(np.diag([1.0, -1.0]), np.eye(2), np.array([[0.0, 1.0], [0.0, 2.0]]), (0,))
    rep = check_structural_assumptions(p)
    assert not rep.detectable and not rep.observable_full


def test_detectable_with_stable_hidden_complex_mode():
    # hidden oscillatory pair with negative real part: detectable but not observable
    a = np.zeros((3, 3))
    a[0, 0] = 1.0
    a[1:, 1:] = [[-1.0, 2.0], [-2.0, -1.0]]
    p = LtiPlant(a, np.ones((3, 1)), np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]), (0,))
    rep = check_structural_assumptions(p)
    assert rep.detectable and not rep.observable_full


def test_matrices():
    a = np.array([[0.5, 1.0], [0.0, 0.0]])
    np.testing.assert_allclose(controllability_matrix(a, [[0.0], [1.0]]), [[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_allclose(observability_matrix([[0.0, 1.0]], a), [[0.0, 1.0], [0.0, 0.0]])


def test_output_and_split():
    p = plant2d()
    y = p.output([5.3, -2.4])
    ys, yv = p.split_output(y)
    assert ys.tolist() == [-2.4] and yv.tolist() == [5.3]
    np.testing.assert_array_equal(p.unstack(ys, yv), y)
    np.testing.assert_allclose(p.derivative([1.0, 2.0], [3.0]), [2.5, 3.0])


@pytest.mark.parametrize("kwargs", [
    dict(a=np.ones((2, 3)), b=np.ones((2, 1)), c=np.eye(2), secured_rows=(0,)),
    dict(a=np.eye(2), b=np.ones((3, 1)), c=np.eye(2), secured_rows=(0,)),
    dict(a=np.eye(2), b=np.ones((2, 1)), c=np.ones((2, 3)), secured_rows=(0,)),
    dict(a=np.eye(2), b=np.ones((2, 1)), c=np.eye(2), secured_rows=(0, 1)),
    dict(a=np.eye(2), b=np.ones((2, 1)), c=np.eye(2), secured_rows=(2,)),
    dict(a=np.eye(2), b=np.ones((2, 1)), c=np.eye(2), secured_rows=(0, 0)),
    dict(a=[[np.nan, 0], [0, 1]], b=np.ones((2, 1)), c=np.eye(2), secured_rows=(0,)),
])
def test_invalid_plants(kwargs):
    with pytest.raises(PlantError):
        LtiPlant(**kwargs)


def test_plant_is_immutable():
    p = plant2d()
    with pytest.raises(ValueError):
        p.a[0, 0] = 3.0


@given(st.integers(2, 6), st.data())
def test_split_unstack_roundtrip(p_dim, data):
    sec = data.draw(st.lists(st.integers(0, p_dim - 1), min_size=0, max_size=p_dim - 1,
                             unique=True))
    plant = LtiPlant(np.eye(2), np.ones((2, 1)), np.ones((p_dim, 2)), tuple(sec))
    y = np.arange(p_dim, dtype=float)
    assert np.array_equal(plant.unstack(*plant.split_output(y)), y)
