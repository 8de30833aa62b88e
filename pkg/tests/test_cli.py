import sys
import subprocess

import pytest
import yaml

from saferecovery.cli import main

from conftest import EXAMPLE_2D


@pytest.fixture
def scenario_file(tmp_path):
    def make(section=None, **values):
        doc = yaml.safe_load(EXAMPLE_2D.read_text(encoding="utf-8"))
        if section:
            doc[section].update(values)
        path = tmp_path / "scn.yaml"
        path.write_text(yaml.safe_dump(doc), encoding="utf-8")
        return str(path)
    return make


def test_certify_admissible(capsys):
    assert main(["certify", str(EXAMPLE_2D)]) == 0
    out = capsys.readouterr().out
    for label in ("nominal:", "attack:", "recovery:", "global_bound:", "min_recovery_time:",
                  "max_attack_duration:", "margin:"):
        assert label in out
    assert "admissible=true" in out


def test_certify_inadmissible(scenario_file, capsys):
    assert main(["certify", scenario_file("attack", T_na=0.01)]) == 1
    assert "admissible=false" in capsys.readouterr().out


def test_malformed_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("plant: [1, 2\n", encoding="utf-8")
    assert main(["certify", str(bad)]) == 2
    assert "line" in capsys.readouterr().err


def test_non_hurwitz_exits_3(scenario_file):
    assert main(["certify", scenario_file("observer", L=[[0.0, 0.0], [0.0, 0.0]])]) == 3


def test_design(capsys):
    assert main(["design", str(EXAMPLE_2D)]) == 0
    out = capsys.readouterr().out
    assert "eig(A - L C)" in out and "K = " in out and "Phi = " in out


def test_simulate_writes_identical_csv(tmp_path, capsys):
    a, b, rep = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "rep.txt"
    assert main(["simulate", str(EXAMPLE_2D), "--out", str(a), "--report", str(rep)]) == 0
    assert main(["simulate", str(EXAMPLE_2D), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0].startswith("t,x_1,x_2")
    assert "all_ok,true" in rep.read_text()


def test_simulate_io_error(tmp_path):
    out = tmp_path / "missing" / "x.csv"
    assert main(["simulate", str(EXAMPLE_2D), "--out", str(out)]) == 4


def test_simulate_refuses_inadmissible(scenario_file, tmp_path):
    path = scenario_file("attack", T_na=0.01)
    out = tmp_path / "x.csv"
    assert main(["simulate", path, "--out", str(out)]) == 1
    assert not out.exists()


def test_simulate_force(scenario_file, tmp_path):
    path = scenario_file("sim", horizon=1.0, x0=[0.0, 5.0])
    out = tmp_path / "x.csv"
    assert main(["simulate", path, "--out", str(out)]) == 1  # strict initial-condition check
    assert not out.exists()
    assert main(["simulate", path, "--out", str(out), "--force"]) in (0, 1)
    assert out.exists()


def test_reproduce_unknown_example():
    assert main(["reproduce", "3d"]) == 2


def test_usage_error():
    assert main(["frobnicate"]) == 2
    assert main([]) == 2


def test_console_script_module():
    out = subprocess.run([sys.executable, "-m", "saferecovery", "--help"], capture_output=True,
                         text=True)
    assert out.returncode == 0 and "certify" in out.stdout
