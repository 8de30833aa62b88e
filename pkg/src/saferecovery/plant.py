"""LTI plant with a secured/vulnerable split of its output rows."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import RANK_RTOL, LinalgError, as_matrix, eigenvalues, numerical_rank

__all__ = ["LtiPlant", "StructuralReport", "PlantError", "check_structural_assumptions",
           "controllability_matrix", "observability_matrix"]


class PlantError(ValueError):
    """Inconsistent plant data."""


def controllability_matrix(a, b) -> np.ndarray:
    a, b = np.asarray(a, float), np.asarray(b, float)
    blocks = [b]
    for _ in range(a.shape[0] - 1):
        blocks.append(a @ blocks[-1])
    return np.hstack(blocks)


def observability_matrix(c, a) -> np.ndarray:
    a, c = np.asarray(a, float), np.asarray(c, float)
    if c.shape[0] == 0:
        return np.zeros((0, a.shape[0]))
    blocks = [c]
    for _ in range(a.shape[0] - 1):
        blocks.append(blocks[-1] @ a)
    return np.vstack(blocks)


@dataclass(frozen=True, eq=False)
class LtiPlant:
    """``dx/dt = A x + B u``, ``y = C x``.

    ``secured_rows`` index the rows of ``C`` that are never attacked (they form
    ``C_s``); the remaining rows are vulnerable (``C_v``).  Row indices are
    zero-based.  ``ordering`` is the permutation that stacks ``C`` as
    ``[C_s; C_v]``; :meth:`unstack` reverses it.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    secured_rows: tuple[int, ...]
    vulnerable_rows: tuple[int, ...] = field(init=False)
    ordering: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        try:
            a = as_matrix(self.a, "A")
            b = as_matrix(self.b, "B")
            c = as_matrix(self.c, "C")
        except LinalgError as exc:
            raise PlantError(str(exc)) from exc
        n = a.shape[0]
        if a.shape != (n, n):
            raise PlantError(f"A must be square, got {a.shape}")
        if b.shape[0] != n:
            raise PlantError(f"B must have {n} rows, got {b.shape}")
        if c.shape[1] != n:
            raise PlantError(f"C must have {n} columns, got {c.shape}")
        p = c.shape[0]
        sec = tuple(int(i) for i in self.secured_rows)
        if len(set(sec)) != len(sec) or any(i < 0 or i >= p for i in sec):
            raise PlantError(f"secured_rows must be distinct indices in [0, {p})")
        if len(sec) >= p:
            raise PlantError("at least one output row must be vulnerable")
        sec = tuple(sorted(sec))
        vul = tuple(i for i in range(p) if i not in sec)
        for name, val in (("a", a), ("b", b), ("c", c), ("secured_rows", sec),
                          ("vulnerable_rows", vul), ("ordering", np.array(sec + vul, dtype=int))):
            if isinstance(val, np.ndarray):
                val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[1]

    @property
    def p(self) -> int:
        return self.c.shape[0]

    @property
    def p_secured(self) -> int:
        return len(self.secured_rows)

    @property
    def c_secured(self) -> np.ndarray:
        return self.c[list(self.secured_rows), :]

    @property
    def c_vulnerable(self) -> np.ndarray:
        return self.c[list(self.vulnerable_rows), :]

    def derivative(self, x, u) -> np.ndarray:
        """``A x + B u``."""
        x = np.asarray(x, dtype=float).reshape(-1)
        u = np.asarray(u, dtype=float).reshape(-1)
        if x.size != self.n or u.size != self.m:
            raise PlantError(f"expected x of size {self.n} and u of size {self.m}")
        return self.a @ x + self.b @ u

    def output(self, x) -> np.ndarray:
        """``C x``."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.n:
            raise PlantError(f"expected x of size {self.n}, got {x.size}")
        return self.c @ x

    def split_output(self, y) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(y_s, y_a)``: the secured and vulnerable parts of *y*."""
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.size != self.p:
            raise PlantError(f"expected y of size {self.p}, got {y.size}")
        return y[list(self.secured_rows)], y[list(self.vulnerable_rows)]

    def unstack(self, y_s, y_a) -> np.ndarray:
        """Inverse of :meth:`split_output`."""
        y = np.empty(self.p)
        y[self.ordering] = np.concatenate([np.ravel(y_s), np.ravel(y_a)])
        return y


def plant_derivative(plant: LtiPlant, x, u) -> np.ndarray:
    return plant.derivative(x, u)


def full_output(plant: LtiPlant, x) -> np.ndarray:
    return plant.output(x)


@dataclass(frozen=True)
class StructuralReport:
    controllable: bool
    detectable: bool
    observable_full: bool
    rank_obs_secured: int


def _detectable(c: np.ndarray, a: np.ndarray, rtol: float) -> bool:
    n = a.shape[0]
    for lam in eigenvalues(a):
        if lam.real >= 0.0:
            pbh = np.vstack([a - lam * np.eye(n), c.astype(complex)])
            if numerical_rank(pbh, rtol) < n:
                return False
    return True


def check_structural_assumptions(plant: LtiPlant, rtol: float = RANK_RTOL) -> StructuralReport:
    """Kalman-rank and PBH checks of controllability and detectability."""
    n = plant.n
    return StructuralReport(
        controllable=numerical_rank(controllability_matrix(plant.a, plant.b), rtol) == n,
        detectable=_detectable(plant.c, plant.a, rtol),
        observable_full=numerical_rank(observability_matrix(plant.c, plant.a), rtol) == n,
        rank_obs_secured=numerical_rank(observability_matrix(plant.c_secured, plant.a), rtol),
    )
