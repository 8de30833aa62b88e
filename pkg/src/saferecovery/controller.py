"""Observer-based CBF-QP feedback.

Both QPs share the form ``min 1/2 |v + K xh|^2 + 1/2 s^2`` subject to one
affine inequality ``g . (v, s) <= c`` with

    g = (grad h(xh) B, h(xh)),    c = -grad h(xh) (A xh + L_mode innovation),

so the minimizer is the Euclidean projection of ``(-K xh, 0)`` onto a
half-space and has a closed form.  ``K`` follows the LQR sign convention:
``A - B K`` is Hurwitz and the reference input is ``-K xh``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .attacks import AttackSchedule
from .linalg import LinalgError, solve_care, spectral_abscissa
from .observer import ObserverGains
from .plant import LtiPlant
from .sets import QuadraticSet

__all__ = [
    "ControllerError",
    "QpInfeasible",
    "ControllerConfig",
    "QpSolution",
    "project_halfspace",
    "solve_cbf_qp",
    "kappa",
    "lqr_reference_gain",
]

ACTIVE_TOL = 1e-9


class ControllerError(ValueError):
    pass


class QpInfeasible(ControllerError):
    """Barrier constraint cannot be met: the input and slack have no leverage."""


@dataclass(frozen=True, eq=False)
class ControllerConfig:
    k_gain: np.ndarray
    barrier: QuadraticSet
    gains: ObserverGains

    def __post_init__(self):
        k = np.array(self.k_gain, dtype=float)
        if k.ndim == 1:
            k = k.reshape(1, -1)
        k.setflags(write=False)
        object.__setattr__(self, "k_gain", k)

    def check(self, plant: LtiPlant) -> None:
        if self.k_gain.shape != (plant.m, plant.n):
            raise ControllerError(f"K must be {plant.m}x{plant.n}, got {self.k_gain.shape}")
        if self.barrier.n != plant.n:
            raise ControllerError("barrier dimension does not match the plant")


@dataclass(frozen=True, eq=False)
class QpSolution:
    v: np.ndarray
    slack: float
    multiplier: float
    active: bool
    strict_complementarity_ok: bool
    residual: float = 0.0


def project_halfspace(w0: np.ndarray, g: np.ndarray, c: float) -> tuple[np.ndarray, float]:
    """Project *w0* onto ``{w : g . w <= c}``; returns ``(w, multiplier)``."""
    viol = float(g @ w0) - c
    if viol <= 0.0:
        return w0.copy(), 0.0
    gg = float(g @ g)
    if gg == 0.0 or not math.isfinite(gg):
        raise QpInfeasible("constraint row vanishes while the constraint is violated")
    lam = viol / gg
    return w0 - lam * g, lam


def qp_data(mode: str, cfg: ControllerConfig, plant: LtiPlant, x_hat, y_measured):
    """Half-space ``g . w <= c`` together with the unconstrained point ``w0``."""
    xh = np.asarray(x_hat, dtype=float).reshape(-1)
    y = np.asarray(y_measured, dtype=float).reshape(-1)
    if mode == "nominal":
        innov = cfg.gains.l_nominal @ (y - plant.c @ xh)
    elif mode == "attack":
        sec = list(plant.secured_rows)
        innov = (cfg.gains.l_attack @ (y[sec] - plant.c_secured @ xh)
                 if sec else np.zeros(plant.n))
    else:
        raise ControllerError(f"unknown mode {mode!r}")
    grad = cfg.barrier.gradient(xh)
    h = cfg.barrier.value(xh)
    g = np.concatenate([grad @ plant.b, [h]])
    c = -float(grad @ (plant.a @ xh + innov))
    w0 = np.concatenate([-(cfg.k_gain @ xh), [0.0]])
    return g, c, w0


def solve_cbf_qp(mode: str, cfg: ControllerConfig, plant: LtiPlant, x_hat, y_measured) -> QpSolution:
    """Closed-form KKT solution of the barrier QP for ``mode`` in {"nominal", "attack"}.

    In attack mode only the secured entries of *y_measured* are read.
    """
    xh = np.asarray(x_hat, dtype=float).reshape(-1)
    if not np.all(np.isfinite(xh)):
        raise ControllerError("non-finite estimate")
    g, c, w0 = qp_data(mode, cfg, plant, xh, y_measured)
    w, lam = project_halfspace(w0, g, c)
    residual = float(g @ w) - c
    active = lam > 0.0
    strict_ok = not (active and lam <= ACTIVE_TOL) and not (not active and lam >= ACTIVE_TOL)
    return QpSolution(v=w[:-1], slack=float(w[-1]), multiplier=lam, active=active,
                      strict_complementarity_ok=strict_ok, residual=residual)


def kappa(t: float, schedule: AttackSchedule, cfg: ControllerConfig, plant: LtiPlant, x_hat,
          y_measured) -> tuple[np.ndarray, QpSolution]:
    """Switching feedback: attack-mode QP on attack intervals, nominal QP otherwise."""
    mode = "attack" if schedule.is_attacked(t) else "nominal"
    sol = solve_cbf_qp(mode, cfg, plant, x_hat, y_measured)
    return sol.v, sol


def lqr_reference_gain(plant: LtiPlant, q_cost=None, r_cost=None, k_gain=None) -> np.ndarray:
    """LQR gain for ``(A, B)``, or a checked pass-through of an explicit *k_gain*."""
    if k_gain is not None:
        k = np.array(k_gain, dtype=float).reshape(plant.m, plant.n)
        if spectral_abscissa(plant.a - plant.b @ k) >= 0.0:
            raise ControllerError("explicit K does not stabilize (A, B)")
        return k
    from .plant import check_structural_assumptions

    if not check_structural_assumptions(plant).controllable:
        raise ControllerError("(A, B) is not controllable")
    q = np.eye(plant.n) if q_cost is None else q_cost
    r = np.eye(plant.m) if r_cost is None else r_cost
    try:
        return solve_care(plant.a, plant.b, q, r)
    except LinalgError as exc:
        raise ControllerError(str(exc)) from exc
