"""Command-line entry point ``saferecovery``.

Subcommands::

    certify <file>                       error envelopes and the recovery condition
    design <file>                        designed gains with their certificates, no simulation
    simulate <file> --out <csv> [--force] [--report <path>]
    reproduce <2d|10d> [--seed N] [--trials N] [--workers N]
    golden [<dir>]                       run the golden fixture suite

Exit codes: 0 success, 1 check failure, 2 parse error, 3 design infeasible,
4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys

import numpy as np

from .attacks import AttackScheduleError
from .certificates import (
    CertificateError,
    certify,
    max_attack_duration,
    min_recovery_time,
)
from .scenario import DesignError, ScenarioError, build, load_scenario
from .simulation import SimulationError, monitor, simulate

EXIT_OK, EXIT_CHECK, EXIT_PARSE, EXIT_DESIGN, EXIT_IO = 0, 1, 2, 3, 4

log = logging.getLogger("saferecovery")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, float):
        return "inf" if math.isinf(v) else f"{v:.6g}"
    if isinstance(v, np.ndarray):
        return np.array2string(v, precision=6, separator=", ", max_line_width=200)
    return str(v)


def _line(label: str, **fields) -> str:
    return f"{label}: " + " ".join(f"{k}={_fmt(v)}" for k, v in fields.items())


def _load(path):
    scn = load_scenario(path)
    return scn, build(scn)


def certificate_lines(b) -> tuple[list[str], bool]:
    """Report lines for the certificate of a built scenario and its admissibility."""
    nom, att = b.nominal, b.attack
    cert = certify(nom, att, b.t_a, b.t_na, b.family.e_bar)
    lines = [
        _line("nominal", c1=nom.c1, lambda_bar_1=nom.lambda_bar_1,
              P_eig=np.linalg.eigvalsh(nom.p_mat), Q_eig=np.linalg.eigvalsh(nom.q_mat)),
        _line("attack", c1_hat=att.c1_hat, c2_hat=att.c2_hat,
              lambda1_hat=att.lambda1_hat if att.lambda1_hat is not None else "none",
              lambda2_hat=att.lambda2_hat,
              n_stable=att.split.n_stable if att.split is not None else "given"),
        _line("recovery", T_a=cert.t_a, T_na=cert.t_na, gamma1_T_na=cert.gamma1_at_tna,
              gamma2_T_a=cert.gamma2_at_ta, product=cert.product, admissible=cert.admissible),
        _line("global_bound", value=cert.global_bound, e_bar=cert.e_bar),
        _line("min_recovery_time", value=min_recovery_time(nom, att, b.t_a)),
    ]
    try:
        t_max = max_attack_duration(nom, att, b.t_na)
        lines.append(_line("max_attack_duration", value=t_max))
    except CertificateError:
        lines.append("max_attack_duration: none (gap too short for any attack)")
    fam = b.family
    lines.append(_line("margin", epsilon=fam.epsilon, required=fam.required_epsilon,
                       ok=fam.margin_ok))
    return lines, cert.admissible


def cmd_certify(args) -> int:
    _, b = _load(args.file)
    lines, ok = certificate_lines(b)
    print("\n".join(lines))
    return EXIT_OK if ok else EXIT_CHECK


def cmd_design(args) -> int:
    from .observer import attack_loop, nominal_loop
    from .plant import check_structural_assumptions

    _, b = _load(args.file)
    rep = check_structural_assumptions(b.plant)
    print(_line("plant", n=b.plant.n, m=b.plant.m, p=b.plant.p,
                secured_rows=list(b.plant.secured_rows), controllable=rep.controllable,
                detectable=rep.detectable, rank_obs_secured=rep.rank_obs_secured))
    print(f"L = {_fmt(b.gains.l_nominal)}")
    print(f"L_tilde = {_fmt(b.gains.l_attack)}")
    print(f"K = {_fmt(b.controller.k_gain)}")
    for name, mat in (("eig(A - L C)", nominal_loop(b.plant, b.gains.l_nominal)),
                      ("eig(A - L_tilde C_s)", attack_loop(b.plant, b.gains.l_attack)),
                      ("eig(A - B K)", b.plant.a - b.plant.b @ b.controller.k_gain)):
        w = np.linalg.eigvals(mat)
        print(f"{name} = " + ", ".join(f"{z.real:.6g}{z.imag:+.6g}j" for z in
                                       sorted(w, key=lambda z: (z.real, z.imag))))
    if b.attack.split is not None:
        print(f"Phi = {_fmt(b.attack.split.phi)}")
    lines, ok = certificate_lines(b)
    print("\n".join(lines))
    return EXIT_OK


def cmd_simulate(args) -> int:
    _, b = _load(args.file)
    _, admissible = certificate_lines(b)
    if not admissible and not args.force:
        print("scenario is not admissible (recovery product > 1); use --force to run anyway",
              file=sys.stderr)
        return EXIT_CHECK
    try:
        cfg = b.config(strict=not args.force)
    except ValueError as exc:  # initial conditions outside the certified sets
        print(f"{exc}; use --force to run anyway", file=sys.stderr)
        return EXIT_CHECK
    status = EXIT_OK
    try:
        tlog = simulate(cfg)
    except SimulationError as exc:
        print(f"simulation aborted: {exc}", file=sys.stderr)
        tlog, status = exc.log, EXIT_CHECK
    try:
        if tlog is not None:
            tlog.to_csv(args.out)
    except OSError as exc:
        print(f"cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_IO
    if tlog is None:
        return EXIT_CHECK
    rep = monitor(tlog, cfg.family, cfg.certificates())
    summary = rep.summary()
    print(summary, end="" if summary.endswith("\n") else "\n")
    if args.report:
        try:
            with open(args.report, "w", encoding="utf-8") as fh:
                fh.write(summary if summary.endswith("\n") else summary + "\n")
        except OSError as exc:
            print(f"cannot write {args.report}: {exc}", file=sys.stderr)
            return EXIT_IO
    if status == EXIT_OK and not rep.ok:
        status = EXIT_CHECK
    return status


def _print_checks(checks) -> bool:
    for c in checks:
        print(c.line())
    n_fail = sum(1 for c in checks if not c.passed)
    print(f"{len(checks) - n_fail}/{len(checks)} checks passed")
    return n_fail == 0


def cmd_reproduce(args) -> int:
    if args.example == "2d":
        from .golden import default_golden_dir, run_fixture

        res = run_fixture(default_golden_dir() / "example_2d.golden.yaml", workers=args.workers)
        ok = _print_checks(res.checks)
    else:
        from .checks import checks_10d

        ok = _print_checks(checks_10d(args.seed, mc_trials=args.trials, workers=args.workers))
    return EXIT_OK if ok else EXIT_CHECK


def cmd_golden(args) -> int:
    from .golden import run_golden_suite

    all_ok = True
    for res in run_golden_suite(args.dir, workers=args.workers):
        kind = " (self-test, mismatch expected)" if res.must_fail else ""
        print(f"== {res.name}{kind}")
        for c in res.checks:
            print("  " + c.line())
        print(f"{'PASS' if res.passed else 'FAIL'} {res.name}")
        all_ok &= res.passed
    return EXIT_OK if all_ok else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="saferecovery",
        description="Certify and simulate observer-based barrier control under sensor "
                    "denial-of-service.",
        epilog="exit codes: 0 ok, 1 check failure, 2 parse error, 3 design infeasible, 4 I/O")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("certify", help="print error envelopes and the recovery condition")
    s.add_argument("file")
    s.set_defaults(func=cmd_certify)

    s = sub.add_parser("design", help="print the designed gains and their certificates")
    s.add_argument("file")
    s.set_defaults(func=cmd_design)

    s = sub.add_parser("simulate", help="simulate and write the trajectory CSV")
    s.add_argument("file")
    s.add_argument("--out", required=True, help="trajectory CSV path")
    s.add_argument("--force", action="store_true",
                   help="run inadmissible scenarios and accept initial conditions outside the sets")
    s.add_argument("--report", help="also write the safety summary to this path")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("reproduce", help="run the bundled benchmark checks")
    s.add_argument("example", help="2d or 10d")
    s.add_argument("--seed", type=int, default=0, help="plant seed for 10d")
    s.add_argument("--trials", type=int, default=0, help="Monte Carlo trials for 10d")
    s.add_argument("--workers", type=int, default=1, help="Monte Carlo processes")
    s.set_defaults(func=cmd_reproduce)

    s = sub.add_parser("golden", help="run the golden fixture suite")
    s.add_argument("dir", nargs="?", default=None)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_golden)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors
        return EXIT_PARSE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "reproduce" and args.example not in ("2d", "10d"):
        print(f"unknown example {args.example!r} (choose 2d or 10d)", file=sys.stderr)
        return EXIT_PARSE
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (DesignError, CertificateError, AttackScheduleError) as exc:
        print(f"design infeasible: {exc}", file=sys.stderr)
        return EXIT_DESIGN
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
