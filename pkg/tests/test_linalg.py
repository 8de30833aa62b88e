import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from saferecovery.linalg import (
    BlockSplit,
    LinalgError,
    eigenvalues,
    induced_two_norm,
    is_stabilizable,
    numerical_rank,
    riccati_residual,
    solve_care,
    solve_care_full,
    solve_lyapunov,
    spectral_abscissa,
    stable_unstable_split,
)

finite = st.floats(-3.0, 3.0, allow_nan=False, allow_infinity=False)


def hurwitz_from(raw):
    a = np.array(raw)
    shift = max(0.0, float(np.max(np.linalg.eigvals(a).real))) + 0.5
    return a - shift * np.eye(a.shape[0])


@st.composite
def square(draw, lo=1, hi=6):
    n = draw(st.integers(lo, hi))
    return draw(arrays(np.float64, (n, n), elements=finite))


# frozen oracles -----------------------------------------------------------

def test_induced_norm_of_rounded_transform():
    # largest singular value of [[1, -.25], [0, .97]] via the 2x2 closed form of Phi^T Phi
    phi = np.array([[1.0, -0.25], [0.0, 0.97]])
    assert induced_two_norm(phi) == pytest.approx(1.1188, abs=1e-3)


def test_lyapunov_identity_gain_example():
    # A - L C for the two-state benchmark; P = I solves with Q = -(A_cl + A_cl^T)
    a_cl = np.array([[-31.5, 0.5], [-0.5, -32.0]])
    q = -(a_cl + a_cl.T)
    np.testing.assert_allclose(q, np.diag([63.0, 64.0]))
    np.testing.assert_allclose(solve_lyapunov(a_cl, q), np.eye(2), atol=1e-12)


def test_lyapunov_scalar():
    assert solve_lyapunov(np.array([[-3.2]]), np.array([[6.4]]))[0, 0] == pytest.approx(1.0)


def test_lyapunov_rejects_unstable():
    with pytest.raises(LinalgError):
        solve_lyapunov(np.array([[0.5]]), np.eye(1))


def test_split_two_state_attack_loop():
    m = np.array([[0.5, 0.95], [0.0, -3.2]])
    sp = stable_unstable_split(m)
    assert sp.n_stable == 1
    assert sp.a11[0, 0] == pytest.approx(-3.2, abs=1e-12)
    assert sp.a22[0, 0] == pytest.approx(0.5, abs=1e-12)
    np.testing.assert_allclose(np.linalg.norm(sp.phi, axis=0), 1.0)


def test_split_already_stable_is_identity():
    sp = stable_unstable_split(-np.eye(2))
    assert sp.n_stable == 2 and sp.a22.shape == (0, 0)
    np.testing.assert_allclose(np.abs(sp.phi), np.eye(2))


def test_split_diagonal_permutation():
    sp = stable_unstable_split(np.diag([-1.0, 2.0, -3.0]))
    assert sp.n_stable == 2
    np.testing.assert_allclose(sp.a22, [[2.0]])
    np.testing.assert_allclose(np.sort(np.diag(sp.a11)), [-3.0, -1.0])
    assert np.allclose(np.abs(sp.phi).sum(axis=0), 1.0)  # a permutation


def test_split_rejects_imaginary_axis():
    with pytest.raises(LinalgError):
        stable_unstable_split(np.array([[0.0, 1.0], [-1.0, 0.0]]))


def test_from_phi_reorders_stable_first():
    m = np.array([[0.5, 0.95], [0.0, -3.2]])
    sp = BlockSplit.from_phi(m, np.array([[1.0, -0.25], [0.0, 0.97]]))
    assert sp.n_stable == 1
    np.testing.assert_allclose(sp.phi[:, 0], [-0.25, 0.97])


def test_care_double_integrator():
    k = solve_care(np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0], [1.0]]),
                   np.eye(2), np.eye(1))
    np.testing.assert_allclose(k, [[1.0, math.sqrt(3.0)]], atol=1e-6)


def test_care_matches_scipy(rng):
    import scipy.linalg as sla

    for _ in range(10):
        n, m = 4, 2
        a = rng.standard_normal((n, n))
        b = rng.standard_normal((n, m))
        p_ref = sla.solve_continuous_are(a, b, np.eye(n), np.eye(m))
        k, p = solve_care_full(a, b, np.eye(n), np.eye(m))[:2]
        np.testing.assert_allclose(p, p_ref, rtol=1e-7, atol=1e-8)
        assert riccati_residual(a, b, np.eye(n), np.eye(m), p) < 1e-8


def test_rank_and_stabilizability():
    assert numerical_rank(np.array([[1.0, 0.0], [0.0, 1e-12]])) == 1
    assert numerical_rank(np.array([[1.0 + 1.0j, 0.0], [0.0, 1.0j]])) == 2
    assert is_stabilizable(np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0], [1.0]]))
    assert not is_stabilizable(np.diag([1.0, -1.0]), np.array([[0.0], [1.0]]))


def test_eigenvalues_sorted_and_abscissa():
    w = eigenvalues(np.diag([2.0, -1.0, 0.5]))
    np.testing.assert_allclose(np.real(w), np.sort(np.real(w)))
    assert spectral_abscissa(np.diag([2.0, -1.0])) == 2.0


# properties ---------------------------------------------------------------

@given(square(), st.integers(0, 2**31 - 1))
def test_lyapunov_residual(raw, seed):
    a = hurwitz_from(raw)
    r = np.random.default_rng(seed).standard_normal(a.shape)
    q = r @ r.T + np.eye(a.shape[0])
    p = solve_lyapunov(a, q)
    scale = max(1.0, float(np.max(np.abs(q))))
    assert np.max(np.abs(a.T @ p + p @ a + q)) / scale <= 1e-10
    np.testing.assert_allclose(p, p.T, atol=1e-12 * max(1.0, np.max(np.abs(p))))


@given(st.integers(2, 7), st.integers(0, 2**31 - 1))
def test_split_reconstruction(n, seed):
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.2, 3.0, n) * rng.choice([-1.0, 1.0], n)
    v = rng.standard_normal((n, n)) + 2 * np.eye(n)
    m = v @ np.diag(w) @ np.linalg.inv(v)
    sp = stable_unstable_split(m)
    scale = max(1.0, float(np.max(np.abs(m))))
    rec = sp.phi @ sp.block_diagonal() @ sp.phi_inv
    assert np.max(np.abs(rec - m)) / scale <= 1e-9
    assert sp.n_stable == int(np.sum(w < 0))
    d = sp.phi_inv @ m @ sp.phi
    k = sp.n_stable
    if 0 < k < n:
        assert np.max(np.abs(d[:k, k:])) / scale <= 1e-9
        assert np.max(np.abs(d[k:, :k])) / scale <= 1e-9
    spec = np.sort_complex(np.concatenate([np.linalg.eigvals(sp.a11), np.linalg.eigvals(sp.a22)]))
    np.testing.assert_allclose(spec, np.sort_complex(w.astype(complex)), atol=1e-7 * scale)
