import numpy as np
import pytest

from saferecovery.example10d import N, build_example_10d, generate_plant
from saferecovery.plant import check_structural_assumptions
from saferecovery.simulation import monitor, simulate


@pytest.fixture(scope="module")
def ex():
    return build_example_10d(seed=0)


def test_generated_plant_structure(ex):
    p = ex.cfg.plant
    assert (p.n, p.m, p.p) == (10, 5, 5)
    rep = check_structural_assumptions(p)
    assert rep.controllable and rep.observable_full and rep.rank_obs_secured == N - 2


def test_seeded_generation_is_deterministic(ex):
    again = build_example_10d(seed=0)
    np.testing.assert_array_equal(again.cfg.plant.a, ex.cfg.plant.a)
    assert again.attempts == ex.attempts


def test_generator_may_reject():
    outs = [generate_plant(np.random.default_rng([0, i])) for i in range(50)]
    assert any(o is None for o in outs) and any(o is not None for o in outs)


def test_certified_scenario(ex):
    assert ex.certificate.admissible
    assert ex.certificate.t_na >= ex.t_na_min
    assert ex.cfg.family.margin_ok
    assert ex.cfg.schedule.declared_t_a == pytest.approx(0.2)


def test_property_suite(ex):
    tl = simulate(ex.cfg)
    rep = monitor(tl, ex.cfg.family, ex.cfg.certificates())
    assert rep.ok, rep.summary()
