"""Switching Luenberger observer and gain design helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .linalg import LinalgError, as_matrix, solve_care, spectral_abscissa
from .plant import LtiPlant, check_structural_assumptions, observability_matrix

__all__ = [
    "ObserverError",
    "ObserverGains",
    "design_nominal_gain",
    "design_attack_gain",
    "observer_derivative",
    "estimation_error",
]


class ObserverError(ValueError):
    """Observer gains violate a dimension or stability requirement."""


@dataclass(frozen=True, eq=False)
class ObserverGains:
    """Nominal gain ``L`` (n x p) and attack-mode gain ``L_s`` (n x p_s).

    The nominal loop ``A - L C`` must be Hurwitz.  Under attack at most
    ``n - rank O(C_s, A)`` eigenvalues of ``A - L_s C_s`` may have
    nonnegative real part.
    """

    l_nominal: np.ndarray
    l_attack: np.ndarray

    @classmethod
    def checked(cls, plant: LtiPlant, l_nominal, l_attack) -> "ObserverGains":
        ln = np.array(l_nominal, dtype=float).reshape(plant.n, -1)
        la = np.array(l_attack, dtype=float).reshape(plant.n, -1) if plant.p_secured else np.zeros((plant.n, 0))
        if ln.shape != (plant.n, plant.p):
            raise ObserverError(f"L must be {plant.n}x{plant.p}, got {ln.shape}")
        if la.shape != (plant.n, plant.p_secured):
            raise ObserverError(f"L_s must be {plant.n}x{plant.p_secured}, got {la.shape}")
        if spectral_abscissa(plant.a - ln @ plant.c) >= 0.0:
            raise ObserverError("A - L C is not Hurwitz")
        n_obs = check_structural_assumptions(plant).rank_obs_secured
        w = np.linalg.eigvals(attack_loop(plant, la))
        if np.sum(w.real >= 0.0) > plant.n - n_obs:
            raise ObserverError(
                "A - L_s C_s has more non-stable eigenvalues than unobservable modes of (C_s, A)")
        ln.setflags(write=False)
        la.setflags(write=False)
        return cls(ln, la)


def nominal_loop(plant: LtiPlant, l_nominal) -> np.ndarray:
    return plant.a - np.asarray(l_nominal, float) @ plant.c


def attack_loop(plant: LtiPlant, l_attack) -> np.ndarray:
    la = np.asarray(l_attack, float).reshape(plant.n, -1)
    if la.shape[1] == 0:
        return plant.a.copy()
    return plant.a - la @ plant.c_secured


def design_nominal_gain(plant: LtiPlant, q_weight, r_weight) -> np.ndarray:
    """``L = G^T`` where ``G`` is the LQR gain of the dual pair ``(A^T, C^T)``."""
    try:
        g = solve_care(plant.a.T, plant.c.T, q_weight, r_weight)
    except LinalgError as exc:
        raise ObserverError(f"nominal gain design failed: {exc}") from exc
    return g.T


def _dual_lqr_on_secured(plant: LtiPlant, q_weight, r_weight) -> np.ndarray:
    n, cs = plant.n, plant.c_secured
    ps = cs.shape[0]
    if ps == 0:
        return np.zeros((n, 0))
    obs = observability_matrix(cs, plant.a)
    # Kalman decomposition: orthonormal basis with the observable subspace first
    _, s, vt = np.linalg.svd(obs)
    k = int(np.sum(s > 1e-8 * s[0])) if s.size and s[0] > 0 else 0
    if k == 0:
        return np.zeros((n, ps))
    t = vt.T
    a_t = t.T @ plant.a @ t
    c_t = cs @ t
    a_o, c_o = a_t[:k, :k], c_t[:, :k]
    q = np.asarray(q_weight, float)
    q_o = q[:k, :k] if q.shape == (n, n) else q
    try:
        g_o = solve_care(a_o.T, c_o.T, q_o, r_weight)
    except LinalgError as exc:
        raise ObserverError(f"attack gain design failed on the observable part: {exc}") from exc
    l_t = np.zeros((n, ps))
    l_t[:k, :] = g_o.T
    return t @ l_t


def design_attack_gain(plant: LtiPlant, l_nominal=None, strategy: str = "delete_columns",
                       q_weight=None, r_weight=None, l_attack=None):
    """Design the attack-mode gain ``L_s``.

    Parameters
    ----------
    strategy : {"delete_columns", "dual_lqr_on_secured", "user_supplied"}
        ``delete_columns`` keeps the columns of ``L`` that multiply secured
        rows.  ``dual_lqr_on_secured`` runs the dual LQR on the observable
        part of ``(C_s, A)``.  ``user_supplied`` checks and passes *l_attack*
        through.

    Returns
    -------
    (gain, abscissa)
        ``abscissa`` is the spectral abscissa of ``A - L_s C_s``.
    """
    if strategy == "delete_columns":
        if l_nominal is None:
            raise ObserverError("delete_columns needs the nominal gain")
        la = np.asarray(l_nominal, float).reshape(plant.n, plant.p)[:, list(plant.secured_rows)]
    elif strategy == "dual_lqr_on_secured":
        q = np.eye(plant.n) if q_weight is None else q_weight
        r = np.eye(plant.p_secured) if r_weight is None else r_weight
        la = _dual_lqr_on_secured(plant, q, r)
    elif strategy == "user_supplied":
        if l_attack is None:
            raise ObserverError("user_supplied strategy needs l_attack")
        la = np.array(l_attack, dtype=float)
        if la.size != plant.n * plant.p_secured:
            raise ObserverError(f"L_s must have {plant.n}x{plant.p_secured} entries")
        la = la.reshape(plant.n, plant.p_secured)
    else:
        raise ObserverError(f"unknown attack-gain strategy {strategy!r}")
    n_obs = check_structural_assumptions(plant).rank_obs_secured
    w = np.linalg.eigvals(attack_loop(plant, la))
    if np.sum(w.real >= 0.0) > plant.n - n_obs:
        raise ObserverError("attack gain does not stabilize the observable part of (C_s, A)")
    return la, float(np.max(w.real))


def observer_derivative(plant: LtiPlant, gains: ObserverGains, attacked: bool, x_hat, u,
                        y_measured) -> np.ndarray:
    """Right-hand side of the switching observer.

    Off-attack: ``A xh + B u + L (y - C xh)``.  Under attack only the secured
    entries of *y_measured* are read: ``A xh + B u + L_s (y_s - C_s xh)``.
    """
    xh = np.asarray(x_hat, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    y = np.asarray(y_measured, dtype=float).reshape(-1)
    if xh.size != plant.n or u.size != plant.m or y.size != plant.p:
        raise ObserverError("dimension mismatch in observer_derivative")
    drift = plant.a @ xh + plant.b @ u
    if attacked:
        if plant.p_secured == 0:
            return drift
        sec = list(plant.secured_rows)
        return drift + gains.l_attack @ (y[sec] - plant.c_secured @ xh)
    return drift + gains.l_nominal @ (y - plant.c @ xh)


def estimation_error(x, x_hat) -> tuple[np.ndarray, float]:
    """``e = x - xh`` and its Euclidean norm."""
    e = np.asarray(x, dtype=float).reshape(-1) - np.asarray(x_hat, dtype=float).reshape(-1)
    return e, float(np.linalg.norm(e))
