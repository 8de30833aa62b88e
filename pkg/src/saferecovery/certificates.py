"""Exponential envelopes on the estimation error and the recovery condition.

Between attacks the error decays at least like ``c1 exp(-lam1 t)`` (from a
Lyapunov pair ``(P, Q)`` of ``A - L C``).  During an attack of length at most
``T_a`` it grows by at most ``gamma2(T_a) = max_{[0, T_a]} c1h exp(-l1h t) +
c2h exp(l2h t)``, built from a stable/unstable split of ``A - L_s C_s``.  If
``gamma1(T_na) * gamma2(T_a) <= 1`` each quiet gap undoes the worst attack and
the error stays below ``gamma1(0) * gamma2(T_a) * E``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import (
    BlockSplit,
    LinalgError,
    induced_two_norm,
    solve_lyapunov,
    spectral_abscissa,
    stable_unstable_split,
)

__all__ = [
    "CertificateError",
    "NominalDecayCert",
    "AttackGrowthCert",
    "RecoveryCertificate",
    "build_nominal_cert",
    "build_attack_cert",
    "gamma1",
    "gamma2",
    "certify",
    "min_recovery_time",
    "max_attack_duration",
]


class CertificateError(ValueError):
    """A certificate cannot be constructed for the given data."""


def _spd_extremes(m: np.ndarray, name: str) -> tuple[float, float]:
    w = np.linalg.eigvalsh(0.5 * (m + m.T))
    if w[0] <= 0.0:
        raise CertificateError(f"{name} is not positive definite (min eigenvalue {w[0]:.3g})")
    return float(w[0]), float(w[-1])


def _lyapunov_pair(a_cl: np.ndarray, q=None, p=None) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(P, Q)`` with ``a^T P + P a = -Q``, given exactly one of them."""
    if (q is None) == (p is None):
        raise CertificateError("supply exactly one of Q or P")
    if spectral_abscissa(a_cl) >= 0.0:
        raise CertificateError("closed loop is not Hurwitz")
    if p is not None:
        pm = np.array(p, dtype=float).reshape(a_cl.shape)
        _spd_extremes(pm, "P")
        qm = -(a_cl.T @ pm + pm @ a_cl)
        _spd_extremes(qm, "induced Q")
        return pm, qm
    qm = np.array(q, dtype=float).reshape(a_cl.shape)
    try:
        pm = solve_lyapunov(a_cl, qm)
    except LinalgError as exc:
        raise CertificateError(str(exc)) from exc
    return pm, qm


@dataclass(frozen=True, eq=False)
class NominalDecayCert:
    """``|e(t)| <= c1 exp(-lambda_bar_1 t) |e(0)|`` off-attack."""

    c1: float
    lambda_bar_1: float
    p_mat: np.ndarray
    q_mat: np.ndarray


def build_nominal_cert(a_cl, q=None, p=None) -> NominalDecayCert:
    """Decay certificate for the Hurwitz matrix ``A - L C``.

    Exactly one of *q* (solve for ``P``) or *p* (``Q`` is induced and must
    come out positive definite) is given.
    """
    a = np.asarray(a_cl, dtype=float)
    pm, qm = _lyapunov_pair(a, q=q, p=p)
    p_min, p_max = _spd_extremes(pm, "P")
    q_min, _ = _spd_extremes(qm, "Q")
    return NominalDecayCert(
        c1=math.sqrt(p_max / p_min),
        lambda_bar_1=q_min / (2.0 * p_max),
        p_mat=pm,
        q_mat=qm,
    )


def gamma1(cert: NominalDecayCert, t: float) -> float:
    return cert.c1 * math.exp(-cert.lambda_bar_1 * t)


@dataclass(frozen=True, eq=False)
class AttackGrowthCert:
    """Constants of the attack-mode growth envelope.

    ``lambda1_hat`` is ``None`` when every mode is unstable under attack
    (``c1_hat`` is then 0).
    """

    c1_hat: float
    c2_hat: float
    lambda1_hat: float | None
    lambda2_hat: float
    split: BlockSplit | None
    p_hat: np.ndarray
    q_hat: np.ndarray

    def envelope(self, t: float) -> float:
        """Pointwise growth factor ``c1h exp(-l1h t) + c2h exp(l2h t)``."""
        decay = self.c1_hat * math.exp(-self.lambda1_hat * t) if self.lambda1_hat is not None else 0.0
        return decay + self.c2_hat * math.exp(self.lambda2_hat * t)

    @classmethod
    def from_constants(cls, c1_hat: float, c2_hat: float, lambda1_hat: float | None,
                       lambda2_hat: float) -> "AttackGrowthCert":
        """Certificate from reference constants, with no split attached."""
        return cls(float(c1_hat), float(c2_hat), lambda1_hat, float(lambda2_hat), None,
                   np.zeros((0, 0)), np.zeros((0, 0)))


def build_attack_cert(a_cl_attack, phi_override=None, q_hat=None, p_hat=None) -> AttackGrowthCert:
    """Growth certificate for ``A - L_s C_s``.

    *phi_override* is either a :class:`BlockSplit` or a raw transform matrix
    whose columns are taken verbatim (reordered stable-first).  Without it the
    Schur-based split with unit-norm columns is used.  One of *q_hat* or
    *p_hat* fixes the Lyapunov pair on the stable block; identity ``Q_hat`` is
    used when neither is given.
    """
    a = np.asarray(a_cl_attack, dtype=float)
    if phi_override is None:
        try:
            split = stable_unstable_split(a)
        except LinalgError as exc:
            raise CertificateError(f"stable/unstable split failed: {exc}") from exc
    elif isinstance(phi_override, BlockSplit):
        split = phi_override
    else:
        split = BlockSplit.from_phi(a, phi_override)
    k = split.n_stable
    norm_phi = induced_two_norm(split.phi)
    if split.a22.size:
        c2_hat = norm_phi * induced_two_norm(split.phi_inv_rows_unstable)
        lambda2_hat = induced_two_norm(split.a22)
    else:
        c2_hat, lambda2_hat = 0.0, 0.0
    if k == 0:
        return AttackGrowthCert(0.0, c2_hat, None, lambda2_hat, split,
                                np.zeros((0, 0)), np.zeros((0, 0)))
    if q_hat is None and p_hat is None:
        q_hat = np.eye(k)
    ph, qh = _lyapunov_pair(split.a11, q=q_hat, p=p_hat)
    ph_min, ph_max = _spd_extremes(ph, "P_hat")
    qh_min, _ = _spd_extremes(qh, "Q_hat")
    c1_hat = norm_phi * induced_two_norm(split.phi_inv_rows_stable) * math.sqrt(ph_max / ph_min)
    return AttackGrowthCert(
        c1_hat=c1_hat,
        c2_hat=c2_hat,
        lambda1_hat=qh_min / (2.0 * ph_max),
        lambda2_hat=lambda2_hat,
        split=split,
        p_hat=ph,
        q_hat=qh,
    )


def gamma2(cert: AttackGrowthCert, t_a: float) -> float:
    """Worst growth factor over an attack of length at most *t_a*.

    The envelope is a sum of exponentials and hence convex, so its maximum
    over ``[0, t_a]`` sits at an endpoint.
    """
    if t_a < 0:
        raise CertificateError("attack length must be nonnegative")
    return max(cert.envelope(0.0), cert.envelope(t_a))


@dataclass(frozen=True)
class RecoveryCertificate:
    t_a: float
    t_na: float
    e_bar: float
    gamma1_at_tna: float
    gamma2_at_ta: float
    product: float
    admissible: bool
    global_bound: float


def certify(nominal: NominalDecayCert, attack: AttackGrowthCert, t_a: float, t_na: float,
            e_bar: float) -> RecoveryCertificate:
    g1 = gamma1(nominal, t_na)
    g2 = gamma2(attack, t_a)
    product = g1 * g2
    return RecoveryCertificate(
        t_a=float(t_a),
        t_na=float(t_na),
        e_bar=float(e_bar),
        gamma1_at_tna=g1,
        gamma2_at_ta=g2,
        product=product,
        admissible=product <= 1.0,
        global_bound=nominal.c1 * g2 * e_bar,
    )


def min_recovery_time(nominal: NominalDecayCert, attack: AttackGrowthCert, t_a: float) -> float:
    """Shortest quiet gap ``T_na`` with ``gamma1(T_na) gamma2(t_a) <= 1``."""
    g2 = gamma2(attack, t_a)
    if not math.isfinite(g2):
        raise CertificateError("gamma2 is not finite")
    return max(0.0, math.log(nominal.c1 * g2) / nominal.lambda_bar_1)


def max_attack_duration(nominal: NominalDecayCert, attack: AttackGrowthCert, t_na: float,
                        tol: float = 1e-9) -> float:
    """Longest ``T_a`` with ``gamma1(t_na) gamma2(T_a) <= 1`` (``inf`` if unbounded)."""
    g1 = gamma1(nominal, t_na)
    if g1 * gamma2(attack, 0.0) > 1.0:
        raise CertificateError("no attack length is admissible for this T_na")
    if attack.c2_hat == 0.0 or attack.lambda2_hat == 0.0:
        # envelope is nonincreasing (or constant) in t
        return math.inf
    lo, hi = 0.0, 1.0
    while g1 * gamma2(attack, hi) <= 1.0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e12:  # pragma: no cover - guarded by the c2/lambda2 check above
            return math.inf
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g1 * gamma2(attack, mid) <= 1.0:
            lo = mid
        else:
            hi = mid
    return lo
