"""Golden fixtures: scenario files paired with expected values and tolerances.

A golden file ``<name>.golden.yaml`` in ``fixtures/golden`` reads::

    scenario: ../example_2d.yaml        # relative to the golden file
    expect:                           # key -> expectation (see checks.compare)
      c1: {value: 1.0, abs: 1.0e-9, provenance: "..."}
    expect_from: other.golden.yaml    # optional: reuse another file's expectations
    only: [c1, lambda_bar_1]          # optional: restrict the keys evaluated
    must_fail: false                  # self-test fixtures expect a mismatch
    csv: example_2d_rows.csv            # optional trajectory snippet, compared by time
    csv_abs: 1.0e-8
    mc: {trials: 200, seed: 0}

A fixture passes when every comparison passes, or, for ``must_fail``
fixtures, when at least one comparison fails.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .checks import Check, compare, evaluate
from .scenario import build, load_scenario
from .simulation import simulate

__all__ = ["GoldenError", "FixtureResult", "default_golden_dir", "load_golden", "run_fixture",
           "run_golden_suite", "csv_rows"]


class GoldenError(RuntimeError):
    """Missing or malformed golden fixture."""


@dataclass
class FixtureResult:
    name: str
    must_fail: bool
    checks: list[Check] = field(default_factory=list)

    @property
    def mismatches(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    @property
    def passed(self) -> bool:
        return bool(self.mismatches) if self.must_fail else not self.mismatches


def default_golden_dir() -> Path:
    return Path(__file__).resolve().parent / "fixtures" / "golden"


def load_golden(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise GoldenError(f"golden fixture not found: {path}")
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    if "scenario" not in doc:
        raise GoldenError(f"{path}: missing 'scenario'")
    expect = dict(doc.get("expect") or {})
    if "expect_from" in doc:
        base = load_golden(path.parent / doc["expect_from"])
        expect = {**base["expect"], **expect}
    if not expect:
        raise GoldenError(f"{path}: no expectations")
    if "only" in doc:
        missing = [k for k in doc["only"] if k not in expect]
        if missing:
            raise GoldenError(f"{path}: 'only' names keys without expectations: {missing}")
        expect = {k: expect[k] for k in doc["only"]}
    scen = path.parent / doc["scenario"]
    if not scen.is_file():
        raise GoldenError(f"{path}: scenario file not found: {scen}")
    return {"path": path, "scenario": scen, "expect": expect,
            "must_fail": bool(doc.get("must_fail", False)), "csv": doc.get("csv"),
            "csv_abs": float(doc.get("csv_abs", 1e-8)), "mc": doc.get("mc") or {}}


def csv_rows(text: str) -> dict[str, list]:
    """Columns of a trajectory CSV, numeric where possible."""
    rows = list(csv.reader(io.StringIO(text)))
    head, body = rows[0], rows[1:]
    cols = {}
    for j, name in enumerate(head):
        vals = [r[j] for r in body]
        try:
            cols[name] = np.array([float(v) for v in vals])
        except ValueError:
            cols[name] = vals
    return cols


def _csv_check(tlog, ref_path: Path, tol: float) -> Check:
    if not ref_path.is_file():
        raise GoldenError(f"golden CSV not found: {ref_path}")
    ref = csv_rows(ref_path.read_text(encoding="utf-8"))
    got = csv_rows(tlog.to_csv())
    if list(ref) != list(got):
        return Check("csv_columns", False, ",".join(got), ",".join(ref), "regression")
    idx = np.searchsorted(got["t"], ref["t"])
    idx = np.clip(idx, 0, got["t"].size - 1)
    if np.max(np.abs(got["t"][idx] - ref["t"])) > 1e-12:
        return Check("csv_rows", False, "sample times differ", "matching times", "regression")
    worst = 0.0
    for name, col in ref.items():
        if isinstance(col, list):
            if [got[name][i] for i in idx] != col:
                return Check(f"csv_{name}", False, "differs", "identical labels", "regression")
        else:
            worst = max(worst, float(np.max(np.abs(got[name][idx] - col))))
    return Check("csv_rows", worst <= tol, worst, f"<= {tol:g}", "regression")


def run_fixture(path, workers: int = 1) -> FixtureResult:
    g = load_golden(path)
    built = build(load_scenario(g["scenario"]))
    cfg = built.config(check_initial=False)
    mc = g["mc"]
    vals = evaluate(cfg, list(g["expect"]), mc_trials=int(mc.get("trials", 200)),
                    mc_seed=int(mc.get("seed", 0)), workers=workers)
    res = FixtureResult(g["path"].name.removesuffix(".golden.yaml"), g["must_fail"])
    for key, spec in g["expect"].items():
        res.checks.append(compare(key, vals[key], spec))
    if g["csv"]:
        res.checks.append(_csv_check(simulate(cfg), g["path"].parent / g["csv"], g["csv_abs"]))
    return res


def run_golden_suite(directory=None, workers: int = 1) -> list[FixtureResult]:
    """Run every ``*.golden.yaml`` in *directory* (default: the bundled set)."""
    d = Path(directory) if directory is not None else default_golden_dir()
    if not d.is_dir():
        raise GoldenError(f"golden directory not found: {d}")
    files = sorted(p for p in d.iterdir() if p.name.endswith(".golden.yaml"))
    if not files:
        raise GoldenError(f"no golden fixtures (*.golden.yaml) in {os.fspath(d)}")
    return [run_fixture(p, workers=workers) for p in files]
