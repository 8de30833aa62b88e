"""Wall-clock comparison of the compiled and pure-Python closed-loop kernels.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat N] [--scenario 2d|10d|both]

Each backend integrates the same scenario; the best of ``N`` runs is reported
along with the largest state difference between backends.
"""

import argparse
import time

import numpy as np

from saferecovery import kernel
from saferecovery.golden import default_golden_dir
from saferecovery.scenario import build, load_scenario
from saferecovery.simulation import simulate


def _scenarios(which):
    out = []
    if which in ("2d", "both"):
        path = default_golden_dir().parent / "example_2d.yaml"
        cfg = build(load_scenario(path)).config()
        out.append(("2d stage", cfg))
        out.append(("2d held", cfg.with_(input_update="step")))
    if which in ("10d", "both"):
        from saferecovery.example10d import build_example_10d

        cfg = build_example_10d(seed=0).cfg
        out.append(("10d stage", cfg.with_(horizon=20.0)))
    return out


def _best(cfg, backend, repeat):
    best, log = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        log = simulate(cfg, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, log


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--scenario", choices=("2d", "10d", "both"), default="both")
    args = p.parse_args(argv)
    backends = kernel.available_backends()
    print(f"backends: {', '.join(backends)} (default {kernel.BACKEND})")
    print(f"{'scenario':<12}{'steps':>8}" + "".join(f"{b + ' [s]':>14}" for b in backends)
          + f"{'speedup':>10}{'max |dx|':>12}")
    for name, cfg in _scenarios(args.scenario):
        res = {b: _best(cfg, b, args.repeat) for b in backends}
        steps = res[backends[0]][1].t.size - 1
        row = f"{name:<12}{steps:>8}" + "".join(f"{res[b][0]:>14.4f}" for b in backends)
        if "cython" in res:
            diff = float(np.max(np.abs(res["cython"][1].x - res["python"][1].x)))
            row += f"{res['python'][0] / res['cython'][0]:>10.1f}{diff:>12.2e}"
        print(row)


if __name__ == "__main__":
    main()
