import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from saferecovery.certificates import (
    AttackGrowthCert,
    CertificateError,
    build_attack_cert,
    build_nominal_cert,
    certify,
    gamma1,
    gamma2,
    max_attack_duration,
    min_recovery_time,
)

A_NOM = np.array([[-31.5, 0.5], [-0.5, -32.0]])
A_ATT = np.array([[0.5, 0.95], [0.0, -3.2]])
PHI = np.array([[1.0, -0.25], [0.0, 0.97]])


def test_nominal_with_identity_p():
    c = build_nominal_cert(A_NOM, p=np.eye(2))
    assert c.c1 == 1.0 and c.lambda_bar_1 == pytest.approx(31.5, abs=1e-12)
    np.testing.assert_allclose(np.linalg.eigvalsh(c.q_mat), [63.0, 64.0])
    assert gamma1(c, 0.047) == pytest.approx(math.exp(-31.5 * 0.047), rel=1e-12)


def test_nominal_requires_one_of_p_q():
    with pytest.raises(CertificateError):
        build_nominal_cert(A_NOM, p=np.eye(2), q=np.eye(2))
    with pytest.raises(CertificateError):
        build_nominal_cert(A_NOM, p=np.diag([1.0, 1e6]))  # induced Q indefinite


def test_attack_with_supplied_transform():
    c = build_attack_cert(A_ATT, phi_override=PHI)
    assert c.lambda1_hat == pytest.approx(3.2, abs=1e-9)
    assert c.lambda2_hat == pytest.approx(0.5, abs=1e-9)
    # frozen: recomputed from the two-decimal transform
    assert c.c1_hat == pytest.approx(1.15340, abs=1e-4)
    assert c.c2_hat == pytest.approx(1.15536, abs=1e-4)
    assert c.c1_hat == pytest.approx(1.12, rel=0.1) and c.c2_hat == pytest.approx(1.19, rel=0.1)


def test_attack_q_hat_6_4_gives_unit_p_hat():
    c = build_attack_cert(A_ATT, phi_override=PHI, q_hat=np.array([[6.4]]))
    np.testing.assert_allclose(c.p_hat, [[1.0]], atol=1e-12)
    assert c.lambda1_hat == pytest.approx(3.2)


def test_fully_unstable():
    c = build_attack_cert(np.array([[0.5]]))
    assert c.c1_hat == 0.0 and c.lambda1_hat is None
    assert c.lambda2_hat == 0.5 and c.c2_hat == pytest.approx(1.0)
    assert gamma2(c, 1.0) == pytest.approx(math.exp(0.5))


def test_reference_constants():
    c = AttackGrowthCert.from_constants(1.12, 1.19, 3.2, 0.5)
    assert gamma2(c, 1.6) == pytest.approx(2.655, abs=1e-3)


def test_gamma2_endpoint_max():
    c = AttackGrowthCert.from_constants(2.0, 0.1, 5.0, 0.2)
    assert gamma2(c, 0.5) == pytest.approx(2.1)  # decay side dominates
    with pytest.raises(CertificateError):
        gamma2(c, -1.0)


def test_certify_inadmissible_gap():
    nom = build_nominal_cert(A_NOM, p=np.eye(2))
    att = AttackGrowthCert.from_constants(1.12, 1.19, 3.2, 0.5)
    cert = certify(nom, att, 1.6, 0.01, 0.55)
    assert cert.gamma1_at_tna == pytest.approx(0.7298, abs=1e-4)
    assert not cert.admissible and cert.product > 1
    assert min_recovery_time(nom, att, 1.6) == pytest.approx(0.031, abs=1e-3)


@given(st.floats(0.05, 5.0))
def test_min_recovery_time_is_tight(t_a):
    nom = build_nominal_cert(A_NOM, p=np.eye(2))
    att = build_attack_cert(A_ATT, phi_override=PHI)
    t = min_recovery_time(nom, att, t_a)
    assert gamma1(nom, t) * gamma2(att, t_a) == pytest.approx(1.0, rel=1e-9) or t == 0.0
    assert certify(nom, att, t_a, t * (1 + 1e-9) + 1e-12, 1.0).admissible


@given(st.floats(0.035, 1.0))
def test_max_attack_duration_inverts(t_na):
    nom = build_nominal_cert(A_NOM, p=np.eye(2))
    att = build_attack_cert(A_ATT, phi_override=PHI)
    t_a = max_attack_duration(nom, att, t_na)
    assert gamma1(nom, t_na) * gamma2(att, t_a) == pytest.approx(1.0, abs=1e-6)


def test_max_attack_duration_none_admissible():
    nom = build_nominal_cert(A_NOM, p=np.eye(2))
    att = build_attack_cert(A_ATT, phi_override=PHI)
    with pytest.raises(CertificateError):
        max_attack_duration(nom, att, 0.0)


def test_envelope_bounds_error_growth(rng):
    """Sampled attack-mode error stays inside the growth envelope."""
    from scipy.linalg import expm

    att = build_attack_cert(A_ATT)
    for _ in range(200):
        e0 = rng.standard_normal(2)
        t = rng.uniform(0, 3)
        assert np.linalg.norm(expm(A_ATT * t) @ e0) <= att.envelope(t) * np.linalg.norm(e0) + 1e-12
    nom = build_nominal_cert(A_NOM, q=np.eye(2))
    for _ in range(200):
        e0 = rng.standard_normal(2)
        t = rng.uniform(0, 0.5)
        assert np.linalg.norm(expm(A_NOM * t) @ e0) <= gamma1(nom, t) * np.linalg.norm(e0) + 1e-12
