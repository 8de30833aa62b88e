"""Small dense linear algebra used by the certificates and gain design.

All functions take array_like input and return fresh ``numpy`` arrays.
Arguments are never mutated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

__all__ = [
    "LinalgError",
    "BlockSplit",
    "as_matrix",
    "eigenvalues",
    "spectral_abscissa",
    "induced_two_norm",
    "solve_lyapunov",
    "stable_unstable_split",
    "solve_care",
    "solve_care_full",
    "riccati_residual",
    "is_stabilizable",
    "numerical_rank",
    "IMAG_AXIS_TOL",
]

#: Eigenvalues with ``|Re| <= IMAG_AXIS_TOL`` make the stable/unstable split ill-posed.
IMAG_AXIS_TOL = 1e-9

RANK_RTOL = 1e-8


class LinalgError(ValueError):
    """Raised when a matrix problem is ill-posed or has no admissible solution."""


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce *m* to a finite 2-D float array (scalars and vectors are promoted)."""
    a = np.array(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise LinalgError(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise LinalgError(f"{name} has non-finite entries")
    return a


def _square(m, name: str = "matrix") -> np.ndarray:
    a = as_matrix(m, name)
    if a.shape[0] != a.shape[1]:
        raise LinalgError(f"{name} must be square, got shape {a.shape}")
    return a


def _sorted_spectrum(w: np.ndarray) -> np.ndarray:
    # deterministic order: (real, imag, original index)
    order = np.lexsort((np.arange(w.size), w.imag, w.real))
    return w[order]


def eigenvalues(m) -> np.ndarray:
    """All eigenvalues of a square matrix, sorted by (real part, imaginary part).

    Raises
    ------
    LinalgError
        If *m* is not square or LAPACK fails to converge.
    """
    a = _square(m)
    try:
        w = sla.eigvals(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise LinalgError(f"eigenvalue iteration did not converge: {exc}") from exc
    return _sorted_spectrum(np.asarray(w, dtype=complex))


def spectral_abscissa(m) -> float:
    """Largest real part over the spectrum of *m*."""
    return float(np.max(eigenvalues(m).real))


def induced_two_norm(m) -> float:
    """Induced 2-norm (largest singular value)."""
    a = as_matrix(m)
    return float(np.linalg.svd(a, compute_uv=False)[0])


def numerical_rank(m, rtol: float = RANK_RTOL) -> int:
    """Rank by singular values above ``rtol * sigma_max`` (real or complex input)."""
    a = np.asarray(m)
    if not np.iscomplexobj(a):
        a = a.astype(float)
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def _check_spd(q: np.ndarray, name: str) -> None:
    if not np.allclose(q, q.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(q).max())):
        raise LinalgError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(0.5 * (q + q.T))[0] <= 0.0:
        raise LinalgError(f"{name} must be positive definite")


def solve_lyapunov(a_cl, q) -> np.ndarray:
    """Solve ``a_cl.T @ P + P @ a_cl = -q`` for symmetric positive definite ``P``.

    Parameters
    ----------
    a_cl : (n, n) array_like
        Hurwitz matrix.
    q : (n, n) array_like
        Symmetric positive definite right-hand side.
    """
    a = _square(a_cl, "a_cl")
    qm = _square(q, "q")
    if qm.shape != a.shape:
        raise LinalgError("a_cl and q must have the same shape")
    _check_spd(qm, "q")
    if spectral_abscissa(a) >= 0.0:
        raise LinalgError("a_cl is not Hurwitz; no positive definite Lyapunov solution")
    # scipy solves A X + X A^H = Q, so pass A^T and -Q
    p = sla.solve_continuous_lyapunov(a.T, -qm)
    p = 0.5 * (p + p.T)
    return p


@dataclass(frozen=True)
class BlockSplit:
    """Similarity transform separating stable from non-stable modes.

    ``inv(phi) @ M @ phi == blockdiag(a11, a22)`` with ``a11`` holding the
    open-left-half-plane eigenvalues.  ``phi_inv_rows_stable`` and
    ``phi_inv_rows_unstable`` are the leading ``n_stable`` and trailing rows of
    ``inv(phi)``.
    """

    phi: np.ndarray
    phi_inv_rows_stable: np.ndarray
    phi_inv_rows_unstable: np.ndarray
    a11: np.ndarray
    a22: np.ndarray
    n_stable: int

    @property
    def n(self) -> int:
        return self.phi.shape[0]

    @property
    def phi_inv(self) -> np.ndarray:
        return np.vstack([self.phi_inv_rows_stable, self.phi_inv_rows_unstable])

    def block_diagonal(self) -> np.ndarray:
        return sla.block_diag(self.a11, self.a22) if self.a22.size else self.a11.copy()

    @classmethod
    def from_phi(cls, m, phi, n_stable: int | None = None) -> "BlockSplit":
        """Build a split from a user-supplied transform.

        The columns of *phi* need not be ordered stable-first: the diagonal
        entries of ``inv(phi) @ M @ phi`` are classified and the columns are
        permuted accordingly.  Only the coupling-free structure is checked when
        *n_stable* is given explicitly (columns taken as already ordered).
        """
        a = _square(m, "m")
        f = _square(phi, "phi")
        if f.shape != a.shape:
            raise LinalgError("phi must match the matrix dimension")
        f_inv = np.linalg.inv(f)
        d = f_inv @ a @ f
        if n_stable is None:
            # classify by the spectrum of each diagonal entry; works for
            # (near) diagonal transforms such as eigenvector matrices
            diag = np.real(np.diag(d))
            stable = np.flatnonzero(diag < 0.0)
            unstable = np.flatnonzero(diag >= 0.0)
            perm = np.concatenate([stable, unstable])
            f = f[:, perm]
            f_inv = f_inv[perm, :]
            d = f_inv @ a @ f
            n_stable = stable.size
        k = int(n_stable)
        return cls(
            phi=f,
            phi_inv_rows_stable=f_inv[:k, :],
            phi_inv_rows_unstable=f_inv[k:, :],
            a11=d[:k, :k],
            a22=d[k:, k:],
            n_stable=k,
        )


def stable_unstable_split(m, imag_tol: float = IMAG_AXIS_TOL) -> BlockSplit:
    """Block-diagonalize *m* into stable and anti-stable parts.

    Uses an ordered real Schur form ``M = U T U^T`` with the stable block
    first, then removes the coupling block ``T12`` by solving the Sylvester
    equation ``T11 X - X T22 = -T12``.  Columns of the resulting transform are
    scaled to unit Euclidean norm.

    Raises
    ------
    LinalgError
        If an eigenvalue lies within *imag_tol* of the imaginary axis.
    """
    a = _square(m, "m")
    n = a.shape[0]
    w = eigenvalues(a)
    if np.any(np.abs(w.real) <= imag_tol):
        raise LinalgError("eigenvalue on the imaginary axis; stable/unstable split is ambiguous")
    t, u, k = sla.schur(a, output="real", sort="lhp")
    t11, t12, t22 = t[:k, :k], t[:k, k:], t[k:, k:]
    if 0 < k < n:
        x = sla.solve_sylvester(t11, -t22, -t12)
    else:
        x = np.zeros((k, n - k))
    # T = S blockdiag(T11, T22) S^-1 with S = [[I, X], [0, I]]
    s = np.eye(n)
    s[:k, k:] = x
    phi = u @ s
    phi = phi / np.linalg.norm(phi, axis=0)
    phi_inv = np.linalg.inv(phi)
    d = phi_inv @ a @ phi
    return BlockSplit(
        phi=phi,
        phi_inv_rows_stable=phi_inv[:k, :],
        phi_inv_rows_unstable=phi_inv[k:, :],
        a11=d[:k, :k],
        a22=d[k:, k:],
        n_stable=int(k),
    )


def is_stabilizable(a, b, rtol: float = RANK_RTOL) -> bool:
    """PBH test: ``[A - lambda I, B]`` has full row rank for every Re(lambda) >= 0."""
    a = _square(a, "a")
    b = as_matrix(b, "b")
    n = a.shape[0]
    for lam in eigenvalues(a):
        if lam.real >= 0.0:
            mat = np.hstack([a - lam * np.eye(n), b.astype(complex)])
            if numerical_rank(mat, rtol) < n:
                return False
    return True


def solve_care_full(a, b, q_cost, r_cost, subspace_tol: float = 1e-10):
    """Stabilizing Riccati solution and LQR gain, returned as ``(gain, P)``.

    ``A^T P + P A - P B R^-1 B^T P + Q = 0`` is solved through the stable
    invariant subspace of the Hamiltonian matrix (ordered real Schur form).
    """
    a = _square(a, "a")
    b = as_matrix(b, "b")
    q = _square(q_cost, "q_cost")
    r = _square(r_cost, "r_cost")
    n = a.shape[0]
    if b.shape[0] != n or q.shape != (n, n) or r.shape != (b.shape[1], b.shape[1]):
        raise LinalgError("inconsistent dimensions for CARE")
    if np.linalg.eigvalsh(0.5 * (q + q.T))[0] < -1e-12:
        raise LinalgError("q_cost must be positive semidefinite")
    _check_spd(r, "r_cost")
    if not is_stabilizable(a, b):
        raise LinalgError("(A, B) is not stabilizable")
    r_inv_bt = np.linalg.solve(r, b.T)
    ham = np.block([[a, -b @ r_inv_bt], [-q, -a.T]])
    w = np.linalg.eigvals(ham)
    if np.any(np.abs(w.real) <= subspace_tol * max(1.0, np.abs(w).max())):
        raise LinalgError("Hamiltonian has eigenvalues on the imaginary axis")
    _, z, k = sla.schur(ham, output="real", sort="lhp")
    if k != n:
        raise LinalgError("Hamiltonian stable subspace has the wrong dimension")
    u11, u21 = z[:n, :n], z[n:, :n]
    if np.linalg.cond(u11) > 1.0 / subspace_tol:
        raise LinalgError("stable subspace is not a graph; CARE has no stabilizing solution")
    p = np.linalg.solve(u11.T, u21.T).T
    p = 0.5 * (p + p.T)
    gain = r_inv_bt @ p
    if spectral_abscissa(a - b @ gain) >= 0.0:
        raise LinalgError("CARE solution is not stabilizing")
    return gain, p


def solve_care(a, b, q_cost, r_cost, subspace_tol: float = 1e-10) -> np.ndarray:
    """Stabilizing LQR gain ``G = R^-1 B^T P``; see :func:`solve_care_full`."""
    return solve_care_full(a, b, q_cost, r_cost, subspace_tol)[0]


def riccati_residual(a, b, q_cost, r_cost, p) -> float:
    """Max-abs entry of ``A^T P + P A - P B R^-1 B^T P + Q``."""
    a, b, q, r, p = (np.asarray(v, dtype=float) for v in (a, b, q_cost, r_cost, p))
    res = a.T @ p + p @ a - p @ b @ np.linalg.solve(r, b.T) @ p + q
    return float(np.abs(res).max())
