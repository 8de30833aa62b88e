"""Quadratic sublevel sets and the derived sets of admissible initial conditions.

A :class:`QuadraticSet` is ``{x : x^T M x + q^T x + r <= 0}``.  The derived
sets are represented implicitly through membership predicates:

* ``X0``: points of ``S`` at distance at least ``epsilon`` from its boundary,
* ``Xtilde``: the ``E``-inflation of ``X0``, tested as distance at least
  ``epsilon - E`` from the boundary of ``S``,
* ``Xbar``: the barrier sublevel set ``{h <= 0}``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SetError",
    "QuadraticSet",
    "SetFamily",
    "InclusionReport",
    "h_value",
    "h_gradient",
    "boundary_distance",
    "membership",
    "member_hat_x0",
    "verify_barrier_inclusion",
]


class SetError(ValueError):
    """Ill-posed set query (unbounded set, non-convergence, bad dimensions)."""


@dataclass(frozen=True, eq=False)
class QuadraticSet:
    m_mat: np.ndarray
    q_vec: np.ndarray
    r_off: float

    def __post_init__(self):
        m = np.array(self.m_mat, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise SetError("M must be square")
        if not np.allclose(m, m.T, atol=1e-12):
            raise SetError("M must be symmetric")
        n = m.shape[0]
        q = np.zeros(n) if self.q_vec is None else np.array(self.q_vec, dtype=float).reshape(-1)
        if q.size != n:
            raise SetError("q must match the dimension of M")
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "m_mat", m)
        object.__setattr__(self, "q_vec", q)
        object.__setattr__(self, "r_off", float(self.r_off))

    @classmethod
    def sublevel(cls, m_mat, level: float) -> "QuadraticSet":
        """``{x : x^T M x <= level}``."""
        m = np.asarray(m_mat, dtype=float)
        return cls(m, np.zeros(m.shape[0]), -float(level))

    @property
    def n(self) -> int:
        return self.m_mat.shape[0]

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        return float(x @ self.m_mat @ x + self.q_vec @ x + self.r_off)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        return 2.0 * (self.m_mat @ x) + self.q_vec

    def contains(self, x) -> bool:
        return self.value(x) <= 0.0

    def ellipsoid(self) -> tuple[np.ndarray, float, np.ndarray, np.ndarray]:
        """``(center, rho, eigvals, eigvecs)`` with the set = ``{(x-c)^T M (x-c) <= rho}``."""
        w, v = np.linalg.eigh(self.m_mat)
        if w[0] <= 0.0:
            raise SetError("M is not positive definite; the set is unbounded")
        center = -0.5 * np.linalg.solve(self.m_mat, self.q_vec)
        rho = float(center @ self.m_mat @ center - self.r_off)
        if rho < 0.0:
            raise SetError("the set is empty")
        return center, rho, w, v

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        center, rho, _, _ = self.ellipsoid()
        half = np.sqrt(rho * np.diag(np.linalg.inv(self.m_mat)))
        return center - half, center + half


def h_value(qset: QuadraticSet, x) -> float:
    return qset.value(x)


def h_gradient(qset: QuadraticSet, x) -> np.ndarray:
    return qset.gradient(x)


def nearest_boundary_point(qset: QuadraticSet, x, tol: float = 1e-13,
                           max_iter: int = 200) -> np.ndarray:
    """Closest point of ``{h = 0}`` to *x* for a bounded quadratic set.

    The stationarity condition ``y - x + mu grad h(y) = 0`` gives
    ``y(mu) = c + (I + 2 mu M)^-1 (x - c)``, reducing the problem to a scalar
    root ``phi(mu) = h(y(mu)) = 0``.  ``phi`` is convex and strictly
    decreasing on ``mu > -1 / (2 lambda_max)``.  The root is found by Newton
    steps in ``s = 1 + 2 mu lambda_max``, safeguarded by a bisection bracket,
    which keeps full relative precision near the pole.  When ``x - c`` has no
    component along the top eigenvector (e.g. at the center) the root sits at
    the pole and the solution is completed inside that eigenspace.
    """
    center, rho, w, v = qset.ellipsoid()
    x = np.asarray(x, dtype=float).reshape(-1)
    if rho == 0.0:
        return center.copy()
    xt = v.T @ (x - center)
    lam_max = w[-1]
    top = np.isclose(w, lam_max, rtol=1e-12, atol=0.0)
    pole = -0.5 / lam_max

    if np.sqrt(np.sum(xt[top] ** 2)) <= 1e-12 * math.sqrt(rho / w[0]):
        z = np.zeros_like(xt)
        rest = ~top
        z[rest] = xt[rest] / (1.0 + 2.0 * pole * w[rest])
        deficit = rho - float(np.sum(w[rest] * z[rest] ** 2))
        if deficit >= 0.0:
            d = xt[top].copy()
            nd = float(np.linalg.norm(d))
            if not nd > 0.0:  # also catches subnormal entries whose norm underflows
                d[:] = 0.0
                d[0], nd = 1.0, 1.0
            z[top] = d / nd * math.sqrt(deficit / lam_max)
            return center + v @ z

    # work in s = 1 + 2 mu lam_max so the pole sits at s = 0 with full relative precision
    gap = lam_max - w

    def phi(s):
        den = (gap + s * w) / lam_max
        z = xt / den
        return float(np.sum(w * z * z) - rho), z, den

    f, z, _ = phi(1.0)
    if f == 0.0:
        return x.copy()
    if f < 0.0:
        a, b = 0.0, 1.0
    else:
        a, b = 1.0, 3.0
        while phi(b)[0] > 0.0:
            a, b = b, 2.0 * b
    s = 1.0
    ftol = tol * rho
    for _ in range(max_iter):
        f, z, den = phi(s)
        if abs(f) <= ftol:
            return center + v @ z
        if f > 0.0:
            a = s
        else:
            b = s
        dphi = float(np.sum(-2.0 * w * w * z * z / (lam_max * den)))
        nxt = s - f / dphi if dphi < 0.0 else 0.5 * (a + b)
        if not (a < nxt < b):
            nxt = 0.5 * (a + b)
        if nxt == s or b - a <= 4.0 * np.finfo(float).eps * abs(s):
            return center + v @ phi(nxt)[1]
        s = nxt
    raise SetError("boundary projection did not converge")


def boundary_distance(qset: QuadraticSet, x) -> float:
    """Euclidean distance from *x* to the boundary ``{h = 0}`` (always nonnegative)."""
    y = nearest_boundary_point(qset, x)
    return float(np.linalg.norm(np.asarray(x, dtype=float).reshape(-1) - y))


@dataclass(frozen=True, eq=False)
class SetFamily:
    """Safe set with its margins ``epsilon`` and ``e_bar``, plus the barrier set.

    ``margin_ok`` records ``epsilon > (1 + gamma1(0) gamma2(T_a)) e_bar`` when
    ``bound_factor = gamma1(0) gamma2(T_a)`` is known.
    """

    safe_set: QuadraticSet
    epsilon: float
    e_bar: float
    barrier: QuadraticSet
    bound_factor: float | None = None

    def __post_init__(self):
        if self.epsilon <= 0 or self.e_bar <= 0:
            raise SetError("epsilon and e_bar must be positive")
        if self.safe_set.n != self.barrier.n:
            raise SetError("safe set and barrier dimensions differ")
        if self.bound_factor is not None and not self.margin_ok:
            warnings.warn(
                f"epsilon={self.epsilon} does not exceed (1 + {self.bound_factor:.6g}) * "
                f"e_bar={self.e_bar}: the safety margin condition fails", stacklevel=3)

    @property
    def n(self) -> int:
        return self.safe_set.n

    @property
    def required_epsilon(self) -> float | None:
        if self.bound_factor is None:
            return None
        return (1.0 + self.bound_factor) * self.e_bar

    @property
    def margin(self) -> float | None:
        req = self.required_epsilon
        return None if req is None else self.epsilon - req

    @property
    def margin_ok(self) -> bool:
        m = self.margin
        return True if m is None else m > 0.0

    def with_bound_factor(self, bound_factor: float) -> "SetFamily":
        return SetFamily(self.safe_set, self.epsilon, self.e_bar, self.barrier, float(bound_factor))


def membership(family: SetFamily, which: str, x) -> bool:
    """Closed-set membership; *which* names one of ``S``/``X0``/``Xtilde``/``Xbar``."""
    s = family.safe_set
    if which == "Xbar":
        return family.barrier.contains(x)
    if not s.contains(x):
        return False
    if which == "S":
        return True
    d = boundary_distance(s, x)
    if which == "X0":
        return d >= family.epsilon
    if which == "Xtilde":
        return d >= family.epsilon - family.e_bar
    raise SetError(f"unknown set {which!r}")


def member_hat_x0(x0, x_hat, e_bar: float) -> bool:
    """``|x_hat - x0| <= e_bar``."""
    d = np.asarray(x_hat, dtype=float).reshape(-1) - np.asarray(x0, dtype=float).reshape(-1)
    return float(np.linalg.norm(d)) <= e_bar


@dataclass(frozen=True)
class InclusionReport:
    included: bool
    worst_deficit: float
    witness: np.ndarray | None
    core_nonempty: bool
    probabilistic: bool
    n_samples: int

    def __bool__(self) -> bool:
        return self.included


def _xtilde_deficit(family: SetFamily, x: np.ndarray) -> float:
    """Positive when *x* lies outside ``Xtilde``."""
    s = family.safe_set
    if not s.contains(x):
        return family.epsilon - family.e_bar + boundary_distance(s, x)
    return (family.epsilon - family.e_bar) - boundary_distance(s, x)


def _barrier_boundary_points(barrier: QuadraticSet, directions: np.ndarray) -> np.ndarray:
    center, rho, _, _ = barrier.ellipsoid()
    m = barrier.m_mat
    quad = np.einsum("ij,jk,ik->i", directions, m, directions)
    radius = np.sqrt(rho / quad)
    return center + directions * radius[:, None]


def verify_barrier_inclusion(family: SetFamily, n_samples: int | None = None,
                             seed: int = 0) -> InclusionReport:
    """Check ``Xbar`` is inside ``Xtilde`` over the boundary of ``Xbar``.

    For ``n = 2`` the boundary is parameterized by angle on a dense grid and
    the worst point is refined by golden-section search.  For ``n > 2``
    boundary points are sampled at random, so the result is probabilistic.
    Also reports whether the core ``S`` eroded by ``(1 + bound_factor) e_bar``
    is nonempty.
    """
    n = family.n
    if n == 2:
        count = 10_000 if n_samples is None else n_samples
        theta = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
        dirs = np.column_stack([np.cos(theta), np.sin(theta)])
        pts = _barrier_boundary_points(family.barrier, dirs)
        deficits = np.array([_xtilde_deficit(family, p) for p in pts])
        i = int(np.argmax(deficits))
        step = 2.0 * np.pi / count

        def f(th):
            p = _barrier_boundary_points(family.barrier, np.array([[math.cos(th), math.sin(th)]]))[0]
            return -_xtilde_deficit(family, p)

        a, b = theta[i] - step, theta[i] + step
        g = (math.sqrt(5.0) - 1.0) / 2.0
        c, d = b - g * (b - a), a + g * (b - a)
        fc, fd = f(c), f(d)
        for _ in range(60):
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - g * (b - a)
                fc = f(c)
            else:
                a, c, fc = c, d, fd
                d = a + g * (b - a)
                fd = f(d)
        th = 0.5 * (a + b)
        worst = max(deficits[i], -f(th))
        witness = pts[i] if deficits[i] >= -f(th) else _barrier_boundary_points(
            family.barrier, np.array([[math.cos(th), math.sin(th)]]))[0]
        probabilistic = False
    else:
        count = 100_000 if n_samples is None else n_samples
        rng = np.random.default_rng(seed)
        dirs = rng.standard_normal((count, n))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        pts = _barrier_boundary_points(family.barrier, dirs)
        deficits = _batch_xtilde_deficit(family, pts)
        i = int(np.argmax(deficits))
        worst, witness = float(deficits[i]), pts[i]
        probabilistic = True
    included = worst <= 0.0
    core_radius = (1.0 + (family.bound_factor or 0.0)) * family.e_bar
    center, rho, w, _ = family.safe_set.ellipsoid()
    # deepest point of an ellipsoid is its center; depth = semi-minor axis
    core_nonempty = math.sqrt(rho / w[-1]) > core_radius
    return InclusionReport(bool(included), float(worst), None if included else witness,
                           bool(core_nonempty), probabilistic, count)


def _batch_xtilde_deficit(family: SetFamily, pts: np.ndarray) -> np.ndarray:
    return np.array([_xtilde_deficit(family, p) for p in pts])
