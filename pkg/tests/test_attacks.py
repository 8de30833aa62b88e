import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from saferecovery.attacks import (
    AttackSchedule,
    AttackScheduleError,
    AttackSignalPolicy,
    is_attacked,
    masked_output,
    worst_case_schedule,
)


def test_worst_case_intervals():
    s = worst_case_schedule(5.0, 1.6, 0.047)
    np.testing.assert_allclose(s.intervals, [(0, 1.6), (1.647, 3.247), (3.294, 4.894), (4.941, 5.0)])
    assert s.declared_t_a == 1.6 and s.declared_t_na == 0.047


def test_worst_case_not_starting_attacked():
    s = worst_case_schedule(4.0, 1.0, 0.5, start_attacked=False)
    assert s.intervals[0] == (0.5, 1.5)


def test_membership_half_open():
    s = AttackSchedule(((1.0, 2.0),))
    assert not s.is_attacked(0.999) and s.is_attacked(1.0) and not s.is_attacked(2.0)
    assert is_attacked(s, 1.5)
    assert s.interval_index(1.5) == 0 and s.interval_index(2.5) is None


@pytest.mark.parametrize("ivs, kw", [
    (((1.0, 0.5),), {}),
    (((0.0, 1.0), (0.5, 2.0)), {}),
    (((0.0, 2.0),), {"declared_t_a": 1.0}),
    (((0.0, 1.0), (1.1, 2.0)), {"declared_t_na": 0.5}),
    (((0.2, 1.0),), {"declared_t_na": 0.5}),
])
def test_invalid_schedules(ivs, kw):
    with pytest.raises(AttackScheduleError):
        AttackSchedule(ivs, **kw)


def test_inferred_declarations():
    s = AttackSchedule(((0.0, 1.0), (1.5, 2.0)))
    assert s.declared_t_a == 1.0 and s.declared_t_na == 0.5
    assert AttackSchedule(()).declared_t_na == np.inf


def test_policies():
    assert np.all(AttackSignalPolicy("zero").signal(0, 0.0, None, 2) == 0.0)
    np.testing.assert_array_equal(AttackSignalPolicy("hold").signal(0, 0.0, [1.0, 2.0], 2), [1.0, 2.0])
    v = AttackSignalPolicy("noise", amplitude=0.5).signal(0, 0.3, None, 100)
    assert np.all(np.abs(v) <= 0.5)
    custom = AttackSignalPolicy("custom", table=((1.0,), (2.0,)))
    assert custom.signal(1, 0.0, None, 1).tolist() == [2.0]
    with pytest.raises(AttackScheduleError):
        custom.signal(2, 0.0, None, 1)
    with pytest.raises(AttackScheduleError):
        custom.check_covers(worst_case_schedule(10.0, 1.0, 1.0))
    with pytest.raises(AttackScheduleError):
        AttackSignalPolicy("replay")


def test_masked_output_example():
    s = worst_case_schedule(8.0, 1.6, 0.047)
    y = np.array([5.3, -2.4])
    np.testing.assert_array_equal(masked_output(s, AttackSignalPolicy("zero"), 0.0, y, (1,)), [0.0, -2.4])
    np.testing.assert_array_equal(masked_output(s, AttackSignalPolicy("zero"), 1.62, y, (1,)), y)
    with pytest.raises(AttackScheduleError):
        masked_output(s, AttackSignalPolicy("hold"), 0.0, y, (1,))


@given(st.floats(0.0, 10.0), st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3),
       st.sampled_from(["zero", "noise", "hold"]), st.integers(0, 2**31 - 1))
def test_masking_never_touches_secured(t, y, kind, seed):
    s = worst_case_schedule(10.0, 1.0, 0.5)
    pol = AttackSignalPolicy(kind, amplitude=10.0, seed=seed)
    out = masked_output(s, pol, t, y, (0, 2), hold_value=[7.0])
    assert out[0] == y[0] and out[2] == y[2]
    if not s.is_attacked(t):
        assert out[1] == y[1]


@given(st.floats(0.5, 20.0), st.floats(0.01, 3.0), st.floats(0.01, 3.0), st.booleans())
def test_worst_case_schedule_is_admissible(horizon, t_a, t_na, start):
    s = worst_case_schedule(horizon, t_a, t_na, start)
    for a, b in s.intervals:
        assert 0 <= a < b <= horizon and b - a <= t_a + 1e-9
    for (_, b0), (a1, _) in zip(s.intervals, s.intervals[1:]):
        assert a1 - b0 >= t_na - 1e-9
