"""Seeded generator for the 10-state, 5-input, 5-output scenario.

A random plant is drawn that is controllable and observable, with exactly
``n_attacked`` modes unobservable from the secured outputs.  The observer gain is the dual
LQR gain with state weight ``100 I`` and input weight ``0.01 I``; the attack
gain keeps the secured columns.  The gap ``T_na`` and the set levels are
derived from the certificates of the generated plant, so the scenario
satisfies the margin condition by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .attacks import AttackSignalPolicy, worst_case_schedule
from .certificates import (
    AttackGrowthCert,
    CertificateError,
    NominalDecayCert,
    RecoveryCertificate,
    build_attack_cert,
    build_nominal_cert,
    certify,
    gamma1,
    gamma2,
    min_recovery_time,
)
from .controller import ControllerConfig, lqr_reference_gain
from .observer import (
    ObserverError,
    ObserverGains,
    attack_loop,
    design_attack_gain,
    design_nominal_gain,
    nominal_loop,
)
from .plant import LtiPlant, check_structural_assumptions
from .sets import QuadraticSet, SetFamily, boundary_distance, verify_barrier_inclusion
from .simulation import ScenarioConfig

__all__ = ["Example10D", "generate_plant", "build_example_10d"]

N, M, P = 10, 5, 5
T_A = 0.2
X0 = np.array([2.0, -1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0])
# shape of S and of the barrier: x1^2 + 2 x2^2 + 2 x1 x2 + sum_{i>2} x_i^2
SHAPE = np.eye(N)
SHAPE[:2, :2] = [[1.0, 1.0], [1.0, 2.0]]


@dataclass(frozen=True, eq=False)
class Example10D:
    cfg: ScenarioConfig
    plant_seed: int
    attempts: int
    nominal: NominalDecayCert
    attack: AttackGrowthCert
    certificate: RecoveryCertificate
    t_na_min: float
    bound_factor: float


def generate_plant(rng: np.random.Generator, n: int = N, m: int = M, p: int = P,
                   n_attacked: int = 2) -> LtiPlant | None:
    """Random plant whose secured outputs miss exactly *n_attacked* modes.

    In Kalman coordinates ``A = [[A_o, 0], [A_21, A_u]]`` and the secured rows
    of ``C`` read only the first block; an orthogonal similarity hides the
    structure.  ``A_u`` is diagonal with entries in ``[0.5, 2]``: these modes
    stay unstable under attack.

    ``B`` is drawn so that the barrier QP stays feasible on the barrier
    boundary: where ``grad h . B`` vanishes (the subspace ``ker(B^T M)``) the
    drift must point inward, i.e. ``M A + A^T M`` is negative definite on that
    subspace.  Returns ``None`` when the drawn ``A`` admits no such ``B``.
    """
    no = n - n_attacked
    a_o = rng.standard_normal((no, no)) / math.sqrt(no)
    a_u = np.diag(rng.uniform(0.5, 2.0, n_attacked))
    a_21 = rng.standard_normal((n_attacked, no)) / math.sqrt(no)
    a_blk = np.block([[a_o, np.zeros((no, n_attacked))], [a_21, a_u]])
    vul = np.sort(rng.choice(p, n_attacked, replace=False))
    sec = [i for i in range(p) if i not in set(vul.tolist())]
    c_blk = np.zeros((p, n))
    c_blk[sec, :no] = rng.standard_normal((len(sec), no))
    c_blk[vul, :] = rng.standard_normal((n_attacked, n))
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    a = q @ a_blk @ q.T
    w, v = np.linalg.eigh(SHAPE @ a + a.T @ SHAPE)
    if w[n - m - 1] >= -0.1 * np.max(np.abs(w)):
        return None
    # ker(B^T M) = span of the n - m most dissipative directions
    b = np.linalg.solve(SHAPE, v[:, n - m:] @ rng.standard_normal((m, m)))
    return LtiPlant(a, b, c_blk @ q.T, tuple(sec))


def build_example_10d(seed: int = 0, n_attacked: int = 2, t_na_cap: float = 150.0,
                      max_attempts: int = 2000, step: float = 1e-3,
                      n_periods: int = 2) -> Example10D:
    """Draw plants from ``seed`` until one meets the rank and design constraints.

    Plants whose certified minimum ``T_na`` exceeds *t_na_cap* are redrawn to
    keep the horizon (``n_periods`` worst-case periods plus one attack)
    tractable.
    """
    for attempt in range(max_attempts):
        rng = np.random.default_rng([seed, attempt])
        plant = generate_plant(rng, n_attacked=n_attacked)
        if plant is None:
            continue
        rep = check_structural_assumptions(plant)
        if not (rep.controllable and rep.observable_full and rep.rank_obs_secured == N - n_attacked):
            continue
        try:
            l_nom = design_nominal_gain(plant, 100.0 * np.eye(N), 0.01 * np.eye(P))
            l_att, _ = design_attack_gain(plant, l_nom, "delete_columns")
            gains = ObserverGains.checked(plant, l_nom, l_att)
            nom = build_nominal_cert(nominal_loop(plant, l_nom), q=np.eye(N))
            att = build_attack_cert(attack_loop(plant, l_att))
        except (ObserverError, CertificateError):
            continue
        t_min = min_recovery_time(nom, att, T_A)
        if not (0.0 < t_min <= t_na_cap):
            continue
        fastest = max(np.max(np.abs(np.linalg.eigvals(nominal_loop(plant, l_nom)))),
                      np.max(np.abs(np.linalg.eigvals(attack_loop(plant, l_att)))))
        if fastest * step > 1.0:
            continue
        t_na = math.ceil(1.05 * t_min * 10.0) / 10.0
        cfg, beta = _scenario(plant, gains, nom, att, t_na, rng, step, n_periods)
        cert = certify(nom, att, T_A, t_na, cfg.family.e_bar)
        return Example10D(cfg, seed, attempt + 1, nom, att, cert, t_min, beta)
    raise RuntimeError(f"no admissible 10-D plant found in {max_attempts} attempts (seed {seed})")


def _scenario(plant, gains, nom, att, t_na, rng, step, n_periods):
    beta = gamma1(nom, 0.0) * gamma2(att, T_A)
    epsilon = 7.0
    e_bar = epsilon / (1.01 * (1.0 + beta))
    d = rng.standard_normal(N)
    xhat0 = X0 + 0.5 * e_bar * d / np.linalg.norm(d)
    lam_max = float(np.max(np.linalg.eigvalsh(SHAPE)))
    rho_b = max(17.0, 1.05 * float(xhat0 @ SHAPE @ xhat0))
    barrier = QuadraticSet.sublevel(SHAPE, rho_b)
    # homothetic sets: the boundary gap is smallest along the minor axis
    root_s = math.sqrt(rho_b) + 1.05 * (epsilon - e_bar) * math.sqrt(lam_max)
    safe = QuadraticSet.sublevel(SHAPE, root_s ** 2)
    while boundary_distance(safe, X0) < 1.01 * epsilon:
        root_s *= 1.05
        safe = QuadraticSet.sublevel(SHAPE, root_s ** 2)
    family = SetFamily(safe, epsilon, e_bar, barrier, bound_factor=beta)
    incl = verify_barrier_inclusion(family, n_samples=20_000, seed=0)
    if not incl.included:  # pragma: no cover - construction guarantees inclusion
        raise RuntimeError(f"barrier set not inside Xtilde (deficit {incl.worst_deficit:.3g})")
    k_gain = lqr_reference_gain(plant, np.eye(N), np.eye(M))
    ctl = ControllerConfig(k_gain, barrier, gains)
    horizon = n_periods * (T_A + t_na) + T_A
    sched = worst_case_schedule(horizon, T_A, t_na)
    cfg = ScenarioConfig(plant, gains, ctl, family, sched, AttackSignalPolicy("zero"), X0,
                         xhat0, horizon, step=step, nominal_cert=nom, attack_cert=att)
    return cfg, beta
