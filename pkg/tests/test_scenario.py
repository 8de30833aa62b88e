import copy

import numpy as np
import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from saferecovery.scenario import (
    DesignError,
    Scenario,
    ScenarioError,
    build,
    dump_scenario,
    load_scenario,
    parse_scenario,
)

from conftest import FIXTURES, EXAMPLE_2D


@pytest.fixture(scope="module")
def text():
    return EXAMPLE_2D.read_text(encoding="utf-8")


@pytest.fixture(scope="module")
def scn():
    return load_scenario(EXAMPLE_2D)


def test_bundled_fixtures_parse_and_build():
    for path in sorted(FIXTURES.glob("*.yaml")):
        build(load_scenario(path))


def test_round_trip(scn):
    again = parse_scenario(dump_scenario(scn))
    assert again == scn
    assert dump_scenario(again) == dump_scenario(scn)


def test_defaults_filled(scn):
    sim = scn.data["sim"]
    assert sim["input_update"] == "stage" and sim["strict"] is True
    assert scn.data["sets"]["S"]["q"] == [0.0, 0.0]


@given(t_a=st.floats(0.01, 5.0), t_na=st.floats(0.01, 5.0), horizon=st.floats(0.5, 20.0),
       x0=st.lists(st.floats(-10, 10), min_size=2, max_size=2),
       policy=st.sampled_from(["zero", "hold", "noise"]), seed=st.integers(0, 2**31))
def test_round_trip_property(scn, t_a, t_na, horizon, x0, policy, seed):
    s = scn.replace("attack", T_a=t_a, T_na=t_na, policy=policy)
    s = s.replace("sim", horizon=horizon, x0=x0, seed=seed)
    assert parse_scenario(dump_scenario(s)) == s


def _error(text_):
    with pytest.raises(ScenarioError) as err:
        parse_scenario(text_, "s.yaml")
    return err.value


def test_unknown_key_has_location(text):
    bad = text.replace("  horizon: 8.0\n", "  horizon: 8.0\n  horizn: 9.0\n")
    err = _error(bad)
    lineno = bad.splitlines().index("  horizn: 9.0") + 1
    assert err.line == lineno and err.column == 3
    assert "horizn" in str(err) and "s.yaml" in str(err)


def test_duplicate_key_has_location(text):
    bad = text.replace("  horizon: 8.0\n", "  horizon: 8.0\n  horizon: 9.0\n")
    err = _error(bad)
    assert err.line == bad.splitlines().index("  horizon: 9.0") + 1
    assert "duplicate" in str(err)


def test_malformed_yaml(text):
    err = _error(text.replace("secured_rows: [1]", "secured_rows: [1"))
    assert err.line is not None and "YAML" in str(err)


@pytest.mark.parametrize("section,key", [("plant", "A"), ("sets", "epsilon"), ("attack", "T_na"),
                                         ("sim", "x0"), ("controller", "K")])
def test_missing_key(text, section, key):
    doc = yaml.safe_load(text)
    del doc[section][key]
    with pytest.raises(ScenarioError):
        parse_scenario(yaml.safe_dump(doc))


@pytest.mark.parametrize("section,key,value", [
    ("plant", "A", [[1.0, 0.0]]),
    ("plant", "secured_rows", [5]),
    ("sim", "x0", [1.0, 2.0, 3.0]),
    ("sim", "step", -1.0),
    ("sim", "input_update", "midpoint"),
    ("attack", "mode", "random"),
    ("sets", "e_bar", "big"),
])
def test_invalid_values(text, section, key, value):
    doc = yaml.safe_load(text)
    doc[section][key] = value
    with pytest.raises(ScenarioError):
        parse_scenario(yaml.safe_dump(doc))


def test_exclusive_alternatives(text):
    doc = yaml.safe_load(text)
    doc["controller"]["lqr"] = {"Q": np.eye(2).tolist(), "R": [[1.0]]}
    with pytest.raises(ScenarioError):
        parse_scenario(yaml.safe_dump(doc))


def test_explicit_schedule(text):
    doc = yaml.safe_load(text)
    doc["attack"] = {"mode": "explicit", "intervals": [[0.0, 1.0], [2.0, 2.5]], "policy": "zero"}
    b = build(parse_scenario(yaml.safe_dump(doc)))
    assert b.schedule.intervals == ((0.0, 1.0), (2.0, 2.5))


def test_design_strategies(text):
    doc = yaml.safe_load(text)
    doc["observer"]["L"] = {"strategy": "dual_lqr", "Q": (100 * np.eye(2)).tolist(),
                            "R": (0.01 * np.eye(2)).tolist()}
    doc["observer"]["L_tilde"] = {"strategy": "delete_columns"}
    doc["controller"] = {"lqr": {"Q": np.eye(2).tolist(), "R": [[1.0]]}}
    b = build(parse_scenario(yaml.safe_dump(doc)))
    assert np.all(np.linalg.eigvals(b.plant.a - b.gains.l_nominal @ b.plant.c).real < 0)


def test_non_hurwitz_gain_is_design_error(scn):
    with pytest.raises(DesignError):
        build(scn.replace("observer", L=[[0.0, 0.0], [0.0, 0.0]]))


def test_replace_is_copy(scn):
    before = copy.deepcopy(scn.data)
    scn.replace("sim", horizon=1.0)
    assert scn.data == before
    assert isinstance(scn.replace("sim", horizon=1.0), Scenario)
