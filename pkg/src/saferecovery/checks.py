"""Named numerical checks shared by the CLI and the golden suite.

Every quantity a fixture can pin down has a key.  Keys are grouped by cost
(see ``KEY_GROUPS``).  Certificate constants are instant; every other group
needs at least one closed-loop run or a randomized oracle batch.  :func:`evaluate` computes only
the groups a caller asks for.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .certificates import (
    CertificateError,
    certify,
    gamma1,
    gamma2,
    max_attack_duration,
    min_recovery_time,
)
from .controller import solve_cbf_qp
from .linalg import solve_care, solve_lyapunov, stable_unstable_split
from .observer import attack_loop, nominal_loop
from .plant import LtiPlant
from .sets import QuadraticSet
from .simulation import ScenarioConfig, monitor, monte_carlo_validate, simulate

__all__ = ["Check", "KEY_GROUPS", "evaluate", "compare", "checks_10d", "trajectory_gap"]

KEY_GROUPS = {
    "cert": ("c1", "lambda_bar_1", "gamma1_tna", "c1_hat", "c2_hat", "lambda1_hat",
             "lambda2_hat", "gamma2_ta", "product", "admissible", "global_bound",
             "min_recovery_time", "max_attack_duration", "eig_nominal_re", "eig_nominal_im",
             "eig_attack_min", "eig_attack_max"),
    "sim": ("max_h_S", "max_h_bar", "max_e", "max_e_attack_start", "report_ok", "sim_seconds"),
    "conv": ("conv_half", "conv_quarter"),
    "mc": ("mc_trials", "mc_safety_or_bound_violations", "mc_barrier_violations", "mc_errors",
           "mc_pass_rate", "mc_seconds"),
    "prop": ("qp_oracle_max_diff", "qp_active_residual", "lyapunov_residual",
             "split_reconstruction", "gradient_fd_error", "care_gain_error"),
}
_GROUP_OF = {k: g for g, keys in KEY_GROUPS.items() for k in keys}


@dataclass(frozen=True)
class Check:
    """Outcome of comparing one value against an expectation."""

    name: str
    passed: bool
    value: object
    expected: str
    provenance: str = ""

    def line(self) -> str:
        v = f"{self.value:.6g}" if isinstance(self.value, float) else str(self.value)
        tag = f"  [{self.provenance}]" if self.provenance else ""
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {v} (expected {self.expected}){tag}"


def group_of(key: str) -> str:
    try:
        return _GROUP_OF[key]
    except KeyError:
        raise KeyError(f"unknown check key {key!r}") from None


def trajectory_gap(coarse, fine) -> float:
    """Max-norm state difference of two logs on the coarse log's sample times."""
    idx = np.searchsorted(fine.t, coarse.t)
    idx = np.clip(idx, 0, fine.t.size - 1)
    if np.max(np.abs(fine.t[idx] - coarse.t)) > 1e-9:
        raise ValueError("fine grid does not contain the coarse sample times")
    zc = np.hstack([coarse.x, coarse.xhat])
    zf = np.hstack([fine.x[idx], fine.xhat[idx]])
    return float(np.max(np.abs(zc - zf)))


def _cert_values(cfg: ScenarioConfig) -> dict:
    nom, att = cfg.certificates()
    t_a, t_na = cfg.schedule.declared_t_a, cfg.schedule.declared_t_na
    cert = certify(nom, att, t_a, t_na, cfg.family.e_bar)
    w_nom = np.linalg.eigvals(nominal_loop(cfg.plant, cfg.gains.l_nominal))
    w_att = np.sort(np.linalg.eigvals(attack_loop(cfg.plant, cfg.gains.l_attack)).real)
    try:
        t_att = max_attack_duration(nom, att, t_na)
    except CertificateError:
        t_att = 0.0
    return {
        "c1": nom.c1,
        "lambda_bar_1": nom.lambda_bar_1,
        "gamma1_tna": gamma1(nom, t_na),
        "c1_hat": att.c1_hat,
        "c2_hat": att.c2_hat,
        "lambda1_hat": att.lambda1_hat if att.lambda1_hat is not None else math.nan,
        "lambda2_hat": att.lambda2_hat,
        "gamma2_ta": gamma2(att, t_a),
        "product": cert.product,
        "admissible": cert.admissible,
        "global_bound": cert.global_bound,
        "min_recovery_time": min_recovery_time(nom, att, t_a),
        "max_attack_duration": t_att,
        "eig_nominal_re": float(np.max(w_nom.real)),
        "eig_nominal_im": float(np.max(np.abs(w_nom.imag))),
        "eig_attack_min": float(w_att[0]),
        "eig_attack_max": float(w_att[-1]),
    }


def _sim_values(cfg: ScenarioConfig) -> dict:
    t0 = time.perf_counter()
    tl = simulate(cfg)
    dt = time.perf_counter() - t0
    rep = monitor(tl, cfg.family, cfg.certificates())
    starts = np.isin(tl.t, np.asarray(cfg.schedule.starts))
    return {
        "max_h_S": float(np.max(tl.h_s)),
        "max_h_bar": float(np.max(tl.h_bar)),
        "max_e": float(np.max(tl.e_norm)),
        "max_e_attack_start": float(np.max(tl.e_norm[starts])) if np.any(starts) else 0.0,
        "report_ok": rep.ok,
        "sim_seconds": dt,
    }


def _conv_values(cfg: ScenarioConfig) -> dict:
    logs = [simulate(cfg.with_(step=cfg.step / f)) for f in (1, 2, 4)]
    return {"conv_half": trajectory_gap(logs[0], logs[1]),
            "conv_quarter": trajectory_gap(logs[0], logs[2])}


def _mc_values(cfg: ScenarioConfig, n_trials: int, seed: int, workers: int) -> dict:
    t0 = time.perf_counter()
    rep = monte_carlo_validate(cfg, n_trials, seed=seed, workers=workers)
    return {
        "mc_trials": rep.n_trials,
        "mc_safety_or_bound_violations": rep.n_safety_or_bound_violations,
        "mc_barrier_violations": rep.n_barrier_violations,
        "mc_errors": len(rep.errors),
        "mc_pass_rate": rep.pass_rate,
        "mc_seconds": time.perf_counter() - t0,
    }


def _kkt_enumerate(g, c, w0):
    """Two-case KKT enumeration for ``min 1/2|w - w0|^2  s.t.  g.w <= c``.

    The inactive case is ``w = w0``; the active case solves the saddle-point
    system ``[[I, g], [g^T, 0]] (w, lam) = (w0, c)``.  The case meeting primal
    and dual feasibility is returned.
    """
    if g @ w0 <= c:
        return w0, 0.0
    k = g.size
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = np.eye(k)
    kkt[:k, k] = g
    kkt[k, :k] = g
    sol = np.linalg.solve(kkt, np.concatenate([w0, [c]]))
    if sol[k] < 0.0:  # pragma: no cover - the active case always has lam >= 0 here
        raise ValueError("no KKT case is feasible")
    return sol[:k], float(sol[k])


def _sample_in(qset: QuadraticSet, rng, n_pts: int) -> np.ndarray:
    lo, hi = qset.bounding_box()
    out = []
    while len(out) < n_pts:
        pts = rng.uniform(lo, hi, size=(4 * n_pts, lo.size))
        out.extend(p for p in pts if qset.value(p) < 0.0)
    return np.asarray(out[:n_pts])


def _prop_values(cfg: ScenarioConfig, seed: int, n_qp: int = 10_000) -> dict:
    from .controller import qp_data

    rng = np.random.default_rng(seed)
    plant, ctl, fam = cfg.plant, cfg.controller, cfg.family
    # barrier QP against explicit KKT enumeration on random points of Xbar
    xs = _sample_in(fam.barrier, rng, n_qp)
    diff = resid = 0.0
    for xh in xs:
        mode = "attack" if rng.random() < 0.5 else "nominal"
        y = plant.c @ (xh + rng.normal(scale=fam.e_bar, size=plant.n))
        sol = solve_cbf_qp(mode, ctl, plant, xh, y)
        g, c, w0 = qp_data(mode, ctl, plant, xh, y)
        w_ref, lam_ref = _kkt_enumerate(g, c, w0)
        w = np.concatenate([sol.v, [sol.slack]])
        diff = max(diff, float(np.max(np.abs(w - w_ref))), abs(sol.multiplier - lam_ref))
        if sol.active:
            resid = max(resid, abs(float(g @ w) - c))
    # Lyapunov residuals on random Hurwitz matrices
    lyap = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 9))
        a = rng.standard_normal((n, n))
        a -= (np.max(np.linalg.eigvals(a).real) + rng.uniform(0.1, 2.0)) * np.eye(n)
        q = rng.standard_normal((n, n))
        q = q @ q.T + n * np.eye(n)
        p = solve_lyapunov(a, q)
        lyap = max(lyap, float(np.max(np.abs(a.T @ p + p @ a + q))) / max(1.0, np.max(np.abs(q))))
    # stable/unstable split reconstruction
    split_err = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 9))
        w = rng.uniform(0.2, 3.0, n) * rng.choice([-1.0, 1.0], n)
        v = rng.standard_normal((n, n))
        m = v @ np.diag(w) @ np.linalg.inv(v)
        sp = stable_unstable_split(m)
        rec = sp.phi @ sp.block_diagonal() @ sp.phi_inv
        split_err = max(split_err, float(np.max(np.abs(rec - m))) / max(1.0, np.max(np.abs(m))))
    # barrier gradient against central differences
    fd = 0.0
    for xh in _sample_in(fam.barrier, rng, 100):
        gr = fam.barrier.gradient(xh)
        hstep = 1e-6
        num = np.array([(fam.barrier.value(xh + hstep * e) - fam.barrier.value(xh - hstep * e))
                        / (2 * hstep) for e in np.eye(plant.n)])
        fd = max(fd, float(np.max(np.abs(gr - num))))
    # double integrator CARE: K = [1, sqrt 3]
    k = solve_care(np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0], [1.0]]),
                   np.eye(2), np.eye(1))
    care_err = float(np.max(np.abs(k - np.array([[1.0, math.sqrt(3.0)]]))))
    return {"qp_oracle_max_diff": diff, "qp_active_residual": resid, "lyapunov_residual": lyap,
            "split_reconstruction": split_err, "gradient_fd_error": fd,
            "care_gain_error": care_err}


def evaluate(cfg: ScenarioConfig, keys, mc_trials: int = 200, mc_seed: int = 0,
             workers: int = 1, prop_seed: int = 0) -> dict:
    """Values for *keys*, computing each needed group once."""
    groups = {group_of(k) for k in keys}
    out: dict = {}
    if "cert" in groups:
        out.update(_cert_values(cfg))
    if "sim" in groups:
        out.update(_sim_values(cfg))
    if "conv" in groups:
        out.update(_conv_values(cfg))
    if "mc" in groups:
        out.update(_mc_values(cfg, mc_trials, mc_seed, workers))
    if "prop" in groups:
        out.update(_prop_values(cfg, prop_seed))
    return {k: out[k] for k in keys}


def compare(name: str, value, spec: dict) -> Check:
    """Compare *value* against an expectation mapping.

    Recognized forms: ``{value, abs}``, ``{value, rel}``, ``{max}``, ``{min}``
    and ``{equals}``; ``provenance`` is carried through.
    """
    prov = str(spec.get("provenance", ""))
    if "equals" in spec:
        return Check(name, value == spec["equals"], value, f"== {spec['equals']}", prov)
    v = float(value)
    if "max" in spec:
        lim = float(spec["max"])
        return Check(name, math.isfinite(v) and v <= lim, v, f"<= {lim:g}", prov)
    if "min" in spec:
        lim = float(spec["min"])
        return Check(name, math.isfinite(v) and v >= lim, v, f">= {lim:g}", prov)
    ref = float(spec["value"])
    if "rel" in spec:
        tol = float(spec["rel"]) * abs(ref)
        desc = f"{ref:g} +/- {100 * float(spec['rel']):g}%"
    else:
        tol = float(spec.get("abs", 0.0))
        desc = f"{ref:g} +/- {tol:g}"
    return Check(name, math.isfinite(v) and abs(v - ref) <= tol, v, desc, prov)


def checks_10d(seed: int = 0, mc_trials: int = 0, workers: int = 1) -> list[Check]:
    """Property suite for a generated 10-state plant (no reference values apply)."""
    from .example10d import build_example_10d
    from .plant import check_structural_assumptions
    from .sets import verify_barrier_inclusion

    ex = build_example_10d(seed)
    cfg = ex.cfg
    plant: LtiPlant = cfg.plant
    rep = check_structural_assumptions(plant)
    n_att = plant.n - rep.rank_obs_secured
    w_nom = np.linalg.eigvals(nominal_loop(plant, cfg.gains.l_nominal))
    w_att = np.linalg.eigvals(attack_loop(plant, cfg.gains.l_attack))
    cert = ex.certificate
    out = [
        Check("controllable", rep.controllable, rep.controllable, "True"),
        Check("observable", rep.observable_full, rep.observable_full, "True"),
        Check("unobservable_from_secured", n_att == 2, n_att, "2"),
        Check("nominal_hurwitz", bool(np.all(w_nom.real < 0)), float(np.max(w_nom.real)), "< 0"),
        Check("attack_unstable_modes", int(np.sum(w_att.real >= 0)) == n_att,
              int(np.sum(w_att.real >= 0)), str(n_att)),
        Check("admissible", cert.admissible, cert.product, "product <= 1"),
        Check("t_na_covers_min", cert.t_na >= ex.t_na_min, cert.t_na, f">= {ex.t_na_min:.6g}"),
        Check("margin_condition", cfg.family.margin_ok, cfg.family.margin, ">= 0"),
        Check("barrier_inside_xtilde",
              verify_barrier_inclusion(cfg.family, n_samples=5000, seed=seed).included,
              "sampled", "included"),
    ]
    t0 = time.perf_counter()
    tl = simulate(cfg)
    dt = time.perf_counter() - t0
    r = monitor(tl, cfg.family, cfg.certificates())
    out += [
        Check("safe", r.safe, r.margin_safe, "margin >= -1e-6"),
        Check("barrier_invariant", r.barrier_invariant, r.margin_barrier, "margin >= -1e-6"),
        Check("error_global_ok", r.error_global_ok, r.margin_global, "margin >= -1e-6"),
        Check("error_at_attack_starts_ok", r.error_at_attack_starts_ok, r.margin_attack_starts,
              "margin >= -1e-6"),
        Check("envelopes_ok", r.envelopes_ok, min(r.per_interval_envelopes, default=0.0),
              "margin >= -1e-6"),
        Check("sim_seconds", True, dt, "informational"),
    ]
    if mc_trials:
        mc = monte_carlo_validate(cfg, mc_trials, seed=seed, workers=workers)
        out.append(Check("mc_safety_or_bound_violations", mc.n_safety_or_bound_violations == 0,
                         mc.n_safety_or_bound_violations, "0"))
        out.append(Check("mc_pass_rate", mc.ok, mc.pass_rate, "1.0"))
    return out
