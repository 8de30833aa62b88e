"""Acceptance criteria for the bundled benchmarks.

Each test prints one ``PASS``/``FAIL`` line for its criterion, followed by the
individual comparisons.  The lines are repeated in the terminal summary of a
pytest run, and ``python3 tests/test_acceptance.py`` prints them directly.
Expected values and tolerances are frozen here; nothing is recomputed from the
implementation under test.
"""

import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from saferecovery.certificates import build_attack_cert, build_nominal_cert, gamma1, gamma2  # noqa: E402
from saferecovery.checks import Check, checks_10d, compare, evaluate  # noqa: E402
from saferecovery.observer import attack_loop, nominal_loop  # noqa: E402
from saferecovery.scenario import build, load_scenario  # noqa: E402

from conftest import EXAMPLE_2D  # noqa: E402

LINES: list[str] = []

# criterion -> (description, {key: expectation}); 8b is the Monte Carlo
# validator's own contract, stricter than criterion 8
CRITERIA = {
    1: ("nominal decay envelope", {
        "c1": {"value": 1.0, "abs": 1e-9},
        "lambda_bar_1": {"value": 31.5, "abs": 1e-9},
        "gamma1_tna": {"value": 0.226, "abs": 1e-3},
        "gamma1_seconds": {"max": 1e-3},
    }),
    2: ("attack growth envelope", {
        "lambda1_hat": {"value": 3.2, "abs": 1e-9},
        "lambda2_hat": {"value": 0.5, "abs": 1e-9},
        "c1_hat": {"value": 1.12, "rel": 0.10},
        "c2_hat": {"value": 1.19, "rel": 0.10},
        "gamma2_ta": {"value": 2.65, "abs": 0.02},
        "gamma2_seconds": {"max": 1e-3},
    }),
    3: ("recovery certificate", {
        "product": {"value": 0.60, "abs": 0.02},
        "admissible": {"equals": True},
        "global_bound": {"value": 1.46, "abs": 0.01},
    }),
    4: ("error dynamics spectra", {
        "eig_nominal_re": {"value": -31.75, "abs": 1e-2},
        "eig_nominal_im": {"value": 0.43, "abs": 1e-2},
        "eig_attack_min": {"value": -3.2, "abs": 1e-9},
        "eig_attack_max": {"value": 0.5, "abs": 1e-9},
    }),
    5: ("worst-case closed-loop run", {
        "max_h_S": {"max": 1e-6},
        "max_h_bar": {"max": 1e-6},
        "max_e": {"max": 1.46 + 1e-6},
        "max_e_attack_start": {"max": 0.55 + 1e-6},
        "sim_seconds": {"max": 5.0},
    }),
    6: ("barrier QP against KKT enumeration", {
        "qp_oracle_max_diff": {"max": 1e-8},
        "qp_active_residual": {"max": 1e-9},
    }),
    7: ("numerical kernels", {
        "lyapunov_residual": {"max": 1e-10},
        "split_reconstruction": {"max": 1e-9},
        "gradient_fd_error": {"max": 1e-5},
        "care_gain_error": {"max": 1e-6},
    }),
    8: ("Monte Carlo invariance, 200 trials", {
        "mc_trials": {"equals": 200},
        "mc_safety_or_bound_violations": {"equals": 0},
        "mc_errors": {"equals": 0},
        "mc_seconds": {"max": 120.0},
    }),
    "8b": ("Monte Carlo full safety report, estimate barrier included", {
        "mc_barrier_violations": {"equals": 0},
        "mc_pass_rate": {"value": 1.0, "abs": 0.0},
    }),
    10: ("step refinement", {
        "conv_half": {"max": 1e-4},
        "conv_quarter": {"max": 2.5e-5},
    }),
}


def _record(num, title: str, checks: list[Check]) -> bool:
    ok = all(c.passed for c in checks)
    lines = [f"{'PASS' if ok else 'FAIL'} criterion {num}: {title}"]
    lines += ["    " + c.line() for c in checks]
    LINES.extend(lines)
    print("\n".join(lines))
    return ok


def _best_time(fn, reps=200) -> float:
    best = np.inf
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


@pytest.fixture(scope="module")
def values():
    b = build(load_scenario(EXAMPLE_2D))
    cfg = b.config()
    keys = [k for _, exp in CRITERIA.values() for k in exp if not k.endswith("_seconds")
            or k in ("sim_seconds", "mc_seconds")]
    out = evaluate(cfg, keys, mc_trials=200, mc_seed=0)
    a_nom = nominal_loop(b.plant, b.gains.l_nominal)
    a_att = attack_loop(b.plant, b.gains.l_attack)
    phi = np.array(b.scenario.data["observer"]["attack_cert"]["Phi"])
    out["gamma1_seconds"] = _best_time(
        lambda: gamma1(build_nominal_cert(a_nom, p=np.eye(2)), 0.047))
    out["gamma2_seconds"] = _best_time(
        lambda: gamma2(build_attack_cert(a_att, phi_override=phi), 1.6))
    return out


def _criterion(num, values):
    title, exp = CRITERIA[num]
    checks = [compare(k, values[k], spec) for k, spec in exp.items()]
    failed = [c.line() for c in checks if not c.passed]
    assert _record(num, title, checks), "\n".join(failed)


@pytest.mark.parametrize("num", [1, 2, 3, 4, 5, 6, 7, 8, "8b", 10])
def test_criterion(num, values):
    _criterion(num, values)


@pytest.mark.parametrize("seed", [0])
def test_criterion_9(seed):
    checks = checks_10d(seed)
    failed = [c.line() for c in checks if not c.passed]
    assert _record(9, f"10-state plant, seed {seed}", checks), "\n".join(failed)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
