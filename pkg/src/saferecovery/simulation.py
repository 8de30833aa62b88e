"""Closed-loop simulation of the plant under observer-based barrier QP feedback.

The coupled state ``z = (x, xh)`` is integrated with fixed-step RK4 on a grid
that contains every attack boundary, so no step crosses a mode switch.  The
QP input is either re-evaluated at every RK4 stage (``input_update="stage"``,
the continuous feedback law) or evaluated at the start of each step and held
over it (``input_update="step"``, a sampled-data loop).
"""

from __future__ import annotations

import io
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernel
from .attacks import AttackSchedule, AttackScheduleError, AttackSignalPolicy
from .certificates import AttackGrowthCert, NominalDecayCert, gamma1, gamma2
from .controller import ControllerConfig
from .observer import ObserverGains
from .plant import LtiPlant
from .sets import SetFamily, member_hat_x0, membership

__all__ = [
    "SimulationError",
    "ScenarioConfig",
    "TrajectoryLog",
    "SafetyReport",
    "MonteCarloReport",
    "time_grid",
    "simulate",
    "monitor",
    "random_admissible_schedule",
    "monte_carlo_validate",
]

log = logging.getLogger(__name__)

MONITOR_TOL = 1e-6
# uniform grid points closer than this fraction of a step to a boundary are dropped
_MERGE_FRAC = 1e-6


class SimulationError(RuntimeError):
    """Simulation aborted; ``log`` holds the samples up to the failure."""

    def __init__(self, msg, log=None, witness=None):
        super().__init__(msg)
        self.log = log
        self.witness = witness


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """Everything needed for one closed-loop run.

    ``nominal_cert`` / ``attack_cert`` feed the logged envelope and the
    monitor; when omitted they are built from ``Q = I`` and the Schur split.
    With ``strict`` set, initial conditions outside ``X0`` or
    ``Xbar`` intersected with the ``e_bar`` ball raise; otherwise they warn.
    """

    plant: LtiPlant
    gains: ObserverGains
    controller: ControllerConfig
    family: SetFamily
    schedule: AttackSchedule
    policy: AttackSignalPolicy
    x0: np.ndarray
    xhat0: np.ndarray
    horizon: float
    step: float = 1e-3
    seed: int = 0
    nominal_cert: NominalDecayCert | None = None
    attack_cert: AttackGrowthCert | None = None
    strict: bool = True
    check_initial: bool = True
    input_update: str = "stage"

    def __post_init__(self):
        x0 = np.array(self.x0, dtype=float).reshape(-1)
        xh0 = np.array(self.xhat0, dtype=float).reshape(-1)
        n = self.plant.n
        if x0.size != n or xh0.size != n:
            raise ValueError(f"x0 and xhat0 must have length {n}")
        if not (self.horizon > 0 and self.step > 0):
            raise ValueError("horizon and step must be positive")
        if self.input_update not in ("stage", "step"):
            raise ValueError("input_update must be 'stage' or 'step'")
        self.controller.check(self.plant)
        self.policy.check_covers(self.schedule)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "xhat0", xh0)
        if self.check_initial:
            problems = self.initial_condition_problems()
            if problems:
                msg = "; ".join(problems)
                if self.strict:
                    raise ValueError(msg)
                warnings.warn(msg, stacklevel=2)

    def initial_condition_problems(self) -> list[str]:
        out = []
        if not membership(self.family, "X0", self.x0):
            out.append("x0 is not in X0")
        if not membership(self.family, "Xbar", self.xhat0):
            out.append("xhat0 is not in Xbar")
        if not member_hat_x0(self.x0, self.xhat0, self.family.e_bar):
            out.append("|x0 - xhat0| exceeds e_bar")
        return out

    def certificates(self) -> tuple[NominalDecayCert, AttackGrowthCert]:
        from .certificates import build_attack_cert, build_nominal_cert
        from .observer import attack_loop, nominal_loop

        nom = self.nominal_cert
        if nom is None:
            nom = build_nominal_cert(nominal_loop(self.plant, self.gains.l_nominal),
                                     q=np.eye(self.plant.n))
        att = self.attack_cert
        if att is None:
            att = build_attack_cert(attack_loop(self.plant, self.gains.l_attack))
        return nom, att

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


@dataclass(eq=False)
class TrajectoryLog:
    """Sampled closed-loop run; every array has one row per grid point."""

    t: np.ndarray
    x: np.ndarray
    xhat: np.ndarray
    u: np.ndarray
    e_norm: np.ndarray
    attacked: np.ndarray
    h_s: np.ndarray
    h_bar: np.ndarray
    envelope: np.ndarray
    qp_active: np.ndarray
    qp_multiplier: np.ndarray
    qp_slack: np.ndarray
    schedule: AttackSchedule = field(repr=False)
    complete: bool = True
    backend: str = ""

    def __len__(self):
        return self.t.size

    @property
    def mode(self) -> list[str]:
        return ["attack" if a else "nominal" for a in self.attacked]

    def columns(self) -> list[str]:
        n, m = self.x.shape[1], self.u.shape[1]
        return (["t"] + [f"x_{i + 1}" for i in range(n)] + [f"xhat_{i + 1}" for i in range(n)]
                + [f"u_{i + 1}" for i in range(m)]
                + ["e_norm", "mode", "h_S", "h_bar", "envelope", "qp_active", "qp_multiplier",
                   "qp_slack"])

    def to_csv(self, fh=None) -> str | None:
        """Write the log as CSV to *fh* (path or text stream), or return it as a string."""
        buf = io.StringIO()
        buf.write(",".join(self.columns()) + "\n")
        num = np.column_stack([self.t, self.x, self.xhat, self.u, self.e_norm])
        tail = np.column_stack([self.h_s, self.h_bar, self.envelope])
        modes = self.mode
        for k in range(self.t.size):
            head = ",".join(f"{v:.17g}" for v in num[k])
            rest = ",".join(f"{v:.17g}" for v in tail[k])
            buf.write(f"{head},{modes[k]},{rest},{int(self.qp_active[k])},"
                      f"{self.qp_multiplier[k]:.17g},{self.qp_slack[k]:.17g}\n")
        text = buf.getvalue()
        if fh is None:
            return text
        if isinstance(fh, (str, bytes)) or hasattr(fh, "__fspath__"):
            with open(fh, "w", newline="") as f:
                f.write(text)
        else:
            fh.write(text)
        return None


def time_grid(horizon: float, step: float, schedule: AttackSchedule) -> np.ndarray:
    """Uniform grid on ``[0, horizon]`` merged with the attack boundaries inside it."""
    n = int(math.floor(horizon / step + 1e-9))
    uniform = np.arange(n + 1) * step
    events = [b for b in schedule.boundaries() if 0.0 < b < horizon]
    events.append(float(horizon))
    events = np.array(sorted(set(events)))
    tol = _MERGE_FRAC * step
    keep = np.ones(uniform.size, dtype=bool)
    idx = np.searchsorted(events, uniform)
    for shift in (0, -1):
        j = np.clip(idx + shift, 0, events.size - 1)
        keep &= np.abs(uniform - events[j]) > tol
    keep[0] = True
    grid = np.union1d(uniform[keep], events)
    return grid


def _attack_table(cfg: ScenarioConfig, t: np.ndarray, attacked: np.ndarray) -> np.ndarray:
    nv = len(cfg.plant.vulnerable_rows)
    pol = cfg.policy
    out = np.zeros((t.size, nv))
    if pol.kind in ("zero", "hold"):
        return out
    if pol.kind == "noise":
        rng = np.random.default_rng([pol.seed, cfg.seed])
        draw = rng.uniform(-pol.amplitude, pol.amplitude, size=(t.size, nv))
        out[attacked] = draw[attacked]
        return out
    for k in np.flatnonzero(attacked):
        i = cfg.schedule.interval_index(float(t[k]))
        out[k] = pol.signal(i, float(t[k]), None, nv)
    return out


def _envelope(t, e_norm, schedule: AttackSchedule, nom: NominalDecayCert,
              att: AttackGrowthCert, last: int) -> np.ndarray:
    """Anchored envelope: growth since the last attack start, decay since the last end."""
    env = np.full(t.size, np.nan)
    anchors = sorted([(a, "attack") for a in schedule.starts if a <= t[last]]
                     + [(b, "quiet") for b in schedule.ends if b <= t[last]])
    if not anchors or anchors[0][0] > 0.0:
        anchors.insert(0, (0.0, "quiet"))
    for j, (ta, kind) in enumerate(anchors):
        t_next = anchors[j + 1][0] if j + 1 < len(anchors) else math.inf
        k0 = int(np.searchsorted(t, ta))
        k1 = int(np.searchsorted(t, t_next)) if math.isfinite(t_next) else last + 1
        k1 = min(k1, last + 1)
        if k0 > last:
            break
        tau = t[k0:k1] - t[k0]
        if kind == "attack":
            env[k0:k1] = e_norm[k0] * np.array([att.envelope(s) for s in tau])
        else:
            env[k0:k1] = e_norm[k0] * nom.c1 * np.exp(-nom.lambda_bar_1 * tau)
    return env


def _quad_values(qset, pts: np.ndarray) -> np.ndarray:
    return np.einsum("ij,jk,ik->i", pts, qset.m_mat, pts) + pts @ qset.q_vec + qset.r_off


def simulate(cfg: ScenarioConfig, backend: str | None = None) -> TrajectoryLog:
    """Run the closed loop of *cfg* over ``[0, horizon]``.

    Raises :class:`SimulationError` on QP infeasibility or a non-finite state;
    the partial log and the offending estimate are attached to the exception.
    """
    plant, ctl = cfg.plant, cfg.controller
    t = time_grid(cfg.horizon, cfg.step, cfg.schedule)
    attacked = np.array([cfg.schedule.is_attacked(float(s)) for s in t], dtype=bool)
    y_att = _attack_table(cfg, t, attacked)
    bar = ctl.barrier
    z0 = np.concatenate([cfg.x0, cfg.xhat0])
    z, u, qp, status, last = kernel.run_closed_loop(
        plant.a, plant.b, plant.c, ctl.gains.l_nominal, ctl.gains.l_attack,
        np.array(plant.secured_rows, dtype=np.intp), np.array(plant.vulnerable_rows, dtype=np.intp),
        ctl.k_gain, bar.m_mat, bar.q_vec, bar.r_off, t, attacked.astype(np.int8),
        cfg.policy.kind == "hold", y_att, z0,
        stage_feedback=cfg.input_update == "stage", backend=backend)
    n = plant.n
    rows = slice(0, last + 1)
    x, xh = z[rows, :n], z[rows, n:]
    e = np.linalg.norm(x - xh, axis=1)
    nom, att = cfg.certificates()
    out = TrajectoryLog(
        t=t[rows], x=x, xhat=xh, u=u[rows], e_norm=e, attacked=attacked[rows],
        h_s=_quad_values(cfg.family.safe_set, x), h_bar=_quad_values(bar, xh),
        envelope=_envelope(t, np.linalg.norm(z[:, :n] - z[:, n:], axis=1), cfg.schedule, nom, att,
                           last)[rows],
        qp_active=qp[rows, 0].astype(bool), qp_multiplier=qp[rows, 1], qp_slack=qp[rows, 2],
        schedule=cfg.schedule, complete=status == kernel.STATUS_OK,
        backend=backend or kernel.BACKEND,
    )
    if status == kernel.STATUS_INFEASIBLE:
        raise SimulationError(f"barrier QP infeasible at t={t[last]:.9g}", out, xh[-1].copy())
    if status == kernel.STATUS_NONFINITE:
        raise SimulationError(f"non-finite state after t={t[last]:.9g}", out, xh[-1].copy())
    return out


@dataclass
class SafetyReport:
    """Monitor verdicts with the margins they were derived from.

    Margins are ``bound - value``; a verdict is true when its margin is at
    least ``-tol``.  ``reentry_ok`` (``x`` in ``X0`` at each attack start after
    the first sample) is reported but not part of :attr:`ok`.
    """

    safe: bool
    barrier_invariant: bool
    error_global_ok: bool
    error_at_attack_starts_ok: bool
    per_interval_envelopes: list[float]
    envelopes_ok: bool
    reentry_ok: bool
    margin_safe: float
    margin_barrier: float
    margin_global: float
    margin_attack_starts: float
    global_bound: float
    strict_complementarity_violations: int
    tol: float = MONITOR_TOL

    @property
    def ok(self) -> bool:
        return (self.safe and self.barrier_invariant and self.error_global_ok
                and self.error_at_attack_starts_ok)

    def summary(self) -> str:
        lines = [
            f"safe,{_b(self.safe)},{self.margin_safe:.9g}",
            f"barrier_invariant,{_b(self.barrier_invariant)},{self.margin_barrier:.9g}",
            f"error_global_ok,{_b(self.error_global_ok)},{self.margin_global:.9g}",
            f"error_at_attack_starts_ok,{_b(self.error_at_attack_starts_ok)},"
            f"{self.margin_attack_starts:.9g}",
            f"envelopes_ok,{_b(self.envelopes_ok)},"
            f"{min(self.per_interval_envelopes, default=math.inf):.9g}",
            f"reentry_x0,{_b(self.reentry_ok)},",
            f"global_bound,,{self.global_bound:.9g}",
            f"strict_complementarity_violations,,{self.strict_complementarity_violations}",
            f"all_ok,{_b(self.ok)},",
        ]
        return "check,pass,margin\n" + "\n".join(lines) + "\n"


def _b(flag: bool) -> str:
    return "true" if flag else "false"


def monitor(tlog: TrajectoryLog, family: SetFamily, certs, tol: float = MONITOR_TOL,
            t_a: float | None = None) -> SafetyReport:
    """Scan *tlog* and evaluate the safety and error-bound checks.

    *certs* is ``(NominalDecayCert, AttackGrowthCert)``; the global bound uses
    ``gamma1(0) gamma2(t_a) e_bar`` with ``t_a`` defaulting to the schedule's
    declared ``T_a``.
    """
    nom, att = certs
    sched = tlog.schedule
    if t_a is None:
        t_a = sched.declared_t_a
    bound = gamma1(nom, 0.0) * gamma2(att, t_a) * family.e_bar
    m_safe = float(-np.max(tlog.h_s))
    m_bar = float(-np.max(tlog.h_bar))
    m_glob = float(bound - np.max(tlog.e_norm))

    t = tlog.t
    starts = [a for a in sched.starts if a <= t[-1]]
    idx = [int(np.searchsorted(t, a)) for a in starts]
    idx = [k for k in idx if k < t.size]
    check_idx = sorted(set([0] + idx))
    m_starts = float(min(family.e_bar - tlog.e_norm[k] for k in check_idx))

    cuts = sorted(set([0] + idx + [int(np.searchsorted(t, b)) for b in sched.ends if b <= t[-1]]))
    cuts = [k for k in cuts if k < t.size] + [t.size]
    per = []
    for k0, k1 in zip(cuts, cuts[1:]):
        if k1 > k0:
            per.append(float(np.min(tlog.envelope[k0:k1] - tlog.e_norm[k0:k1])))
    reentry = all(membership(family, "X0", tlog.x[k]) for k in idx if k > 0)

    mult = tlog.qp_multiplier
    sc_viol = int(np.sum(tlog.qp_active & (mult <= 1e-9)))
    return SafetyReport(
        safe=m_safe >= -tol,
        barrier_invariant=m_bar >= -tol,
        error_global_ok=m_glob >= -tol,
        error_at_attack_starts_ok=m_starts >= -tol,
        per_interval_envelopes=per,
        envelopes_ok=all(p >= -tol for p in per),
        reentry_ok=reentry,
        margin_safe=m_safe,
        margin_barrier=m_bar,
        margin_global=m_glob,
        margin_attack_starts=m_starts,
        global_bound=bound,
        strict_complementarity_violations=sc_viol,
        tol=tol,
    )


def random_admissible_schedule(rng: np.random.Generator, horizon: float, t_a: float,
                               t_na: float, gap_spread: float = 2.0) -> AttackSchedule:
    """Attacks of length in ``(0, t_a]`` separated by gaps in ``[t_na, gap_spread * t_na]``."""
    intervals = []
    t = 0.0 if rng.random() < 0.5 else t_na * (1.0 + (gap_spread - 1.0) * rng.random())
    while t < horizon:
        length = t_a * (1.0 - rng.random())  # in (0, t_a]
        end = min(t + length, horizon)
        intervals.append((t, end))
        t = end + t_na * (1.0 + (gap_spread - 1.0) * rng.random())
    return AttackSchedule(tuple(intervals), declared_t_a=t_a, declared_t_na=t_na)


def _sample_initial(cfg: ScenarioConfig, rng: np.random.Generator, max_attempts: int):
    fam = cfg.family
    lo, hi = fam.safe_set.bounding_box()
    n = fam.n
    for _ in range(max_attempts):
        x0 = lo + (hi - lo) * rng.random(n)
        if not membership(fam, "X0", x0):
            continue
        for _ in range(100):
            d = rng.standard_normal(n)
            d *= fam.e_bar * rng.random() ** (1.0 / n) / np.linalg.norm(d)
            xh0 = x0 + d
            if membership(fam, "Xbar", xh0):
                return x0, xh0
    raise SimulationError(f"rejection sampling found no admissible (x0, xhat0) in {max_attempts} draws")


@dataclass
class MonteCarloReport:
    n_trials: int
    n_passed: int
    worst_margin_safe: float
    worst_margin_barrier: float
    worst_margin_global: float
    worst_margin_attack_starts: float
    failures: list[int]
    errors: list[tuple[int, str]]
    # trials leaving S or exceeding an error bound (aborted runs included)
    n_safety_or_bound_violations: int = 0
    # trials whose estimate left the barrier set
    n_barrier_violations: int = 0

    @property
    def pass_rate(self) -> float:
        return self.n_passed / self.n_trials

    @property
    def ok(self) -> bool:
        return self.n_passed == self.n_trials


def _trial(args):
    cfg, seed, i, backend, max_attempts = args
    rng = np.random.default_rng([seed, i])
    x0, xh0 = _sample_initial(cfg, rng, max_attempts)
    sched = random_admissible_schedule(rng, cfg.horizon, cfg.schedule.declared_t_a,
                                       cfg.schedule.declared_t_na)
    pol = cfg.policy
    if pol.kind == "custom":
        pol = AttackSignalPolicy("zero")
    trial = cfg.with_(x0=x0, xhat0=xh0, schedule=sched, policy=pol, seed=int(rng.integers(2**31)))
    tl = simulate(trial, backend=backend)
    return monitor(tl, cfg.family, trial.certificates())


def monte_carlo_validate(base_cfg: ScenarioConfig, n_trials: int, seed: int = 0,
                         workers: int = 1, backend: str | None = None,
                         max_attempts: int = 100_000) -> MonteCarloReport:
    """Simulate and monitor *n_trials* random admissible scenarios derived from *base_cfg*.

    Trial ``i`` draws from ``default_rng([seed, i])``: ``x0`` uniform in
    ``X0`` (rejection from the bounding box of ``S``), ``xhat0`` uniform in the
    ``e_bar`` ball around ``x0`` and inside ``Xbar``, and a schedule with the
    base ``T_a`` / ``T_na``.  Results do not depend on *workers*.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    base = base_cfg.with_(check_initial=False)
    jobs = [(base, seed, i, backend, max_attempts) for i in range(n_trials)]
    results = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futs = [ex.submit(_trial, j) for j in jobs]
            for i, f in enumerate(futs):
                try:
                    results.append(f.result())
                except (SimulationError, AttackScheduleError) as exc:
                    results.append(exc)
    else:
        for j in jobs:
            try:
                results.append(_trial(j))
            except (SimulationError, AttackScheduleError) as exc:
                results.append(exc)
    reports = [r for r in results if isinstance(r, SafetyReport)]
    errors = [(i, str(r)) for i, r in enumerate(results) if not isinstance(r, SafetyReport)]
    failures = [i for i, r in enumerate(results) if isinstance(r, SafetyReport) and not r.ok]

    def worst(attr):
        return min((getattr(r, attr) for r in reports), default=math.nan)

    return MonteCarloReport(
        n_trials=n_trials,
        n_passed=sum(1 for r in reports if r.ok),
        worst_margin_safe=worst("margin_safe"),
        worst_margin_barrier=worst("margin_barrier"),
        worst_margin_global=worst("margin_global"),
        worst_margin_attack_starts=worst("margin_attack_starts"),
        failures=failures,
        errors=errors,
        n_safety_or_bound_violations=len(errors) + sum(
            1 for r in reports
            if not (r.safe and r.error_global_ok and r.error_at_attack_starts_ok)),
        n_barrier_violations=sum(1 for r in reports if not r.barrier_invariant),
    )
