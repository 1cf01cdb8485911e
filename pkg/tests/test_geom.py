import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cablequad.geom import (E1, E2, E3, SymmetryError, cross, err_s2, err_so3, expm_so3, hat,
                            is_rotation, orthonormalize, ortho_error, psi_q, psi_R, rot_axis, vee)

finite = st.floats(-10, 10, allow_nan=False)
vec3 = arrays(np.float64, 3, elements=finite)


def unit(v):
    n = np.linalg.norm(v)
    return v / n if n > 1e-6 else E1


unit3 = vec3.map(unit)


def test_hat_examples():
    np.testing.assert_allclose(hat([1, 2, 3]) @ E1, [0, 3, -2])
    v = np.array([0.2, -1.1, 4.0])
    np.testing.assert_allclose(hat(v) @ v, 0.0, atol=1e-15)
    np.testing.assert_allclose(vee(hat(v)), v)


def test_vee_examples():
    np.testing.assert_allclose(vee(hat([1, 2, 3])), [1, 2, 3])
    np.testing.assert_allclose(vee(np.zeros((3, 3))), 0.0)
    R = rot_axis(E2, 0.7)
    np.testing.assert_allclose(vee(0.5 * (R.T @ R - R.T @ R)), 0.0)


def test_vee_rejects_non_skew():
    with pytest.raises(SymmetryError):
        vee(np.eye(3))


def test_err_s2_examples():
    eq, ew = err_s2(-E3, -E3, np.zeros(3), np.zeros(3))
    np.testing.assert_allclose(eq, 0.0)
    np.testing.assert_allclose(ew, 0.0)
    eq, _ = err_s2(E1, E3, np.zeros(3), np.zeros(3))
    np.testing.assert_allclose(eq, [0, 1, 0])
    w = np.array([0.3, -0.2, 0.0])
    _, ew = err_s2(E3, E3, w, np.zeros(3))
    np.testing.assert_allclose(ew, w)


def test_err_so3_examples():
    R = rot_axis(E1, 0.4)
    eR, eW = err_so3(R, R, E2, E2)
    np.testing.assert_allclose(eR, 0.0, atol=1e-15)
    np.testing.assert_allclose(eW, 0.0, atol=1e-15)
    eR, _ = err_so3(rot_axis(E3, np.pi / 6), np.eye(3), np.zeros(3), np.zeros(3))
    np.testing.assert_allclose(eR, [0, 0, 0.5], atol=1e-15)
    eR, _, flag = err_so3(rot_axis(E1, np.pi), np.eye(3), np.zeros(3), np.zeros(3), return_flag=True)
    np.testing.assert_allclose(eR, 0.0, atol=1e-15)
    assert flag


def test_psi_examples():
    q = unit(np.array([0.3, -0.4, 0.5]))
    assert psi_q(q, q) == pytest.approx(0.0, abs=1e-15)
    assert psi_q(-q, q) == pytest.approx(2.0)
    assert psi_q(E1, E2) == pytest.approx(1.0)
    Rd = rot_axis(E2, 0.3)
    assert psi_R(Rd, Rd) == pytest.approx(0.0, abs=1e-15)
    assert psi_R(Rd @ rot_axis(unit(np.array([1.0, 2, 3])), np.pi), Rd) == pytest.approx(2.0)
    assert psi_R(Rd @ rot_axis(E3, np.pi / 2), Rd) == pytest.approx(1.0)


def test_psi_batched_matches_scalar(rng):
    R = np.array([expm_so3(rng.normal(size=3)) for _ in range(4)])
    Rd = np.array([expm_so3(rng.normal(size=3)) for _ in range(4)])
    np.testing.assert_allclose(psi_R(R, Rd), [psi_R(a, b) for a, b in zip(R, Rd)])


@given(vec3, vec3)
def test_hat_antisymmetry(v, w):
    np.testing.assert_allclose(hat(v) @ w + hat(w) @ v, 0.0, atol=1e-12)
    np.testing.assert_allclose(cross(v, w), np.cross(v, w), atol=1e-12)


@given(vec3)
def test_vee_hat_inverse(v):
    np.testing.assert_allclose(vee(hat(v)), v, atol=1e-12)
    S = hat(v)
    np.testing.assert_allclose(hat(vee(S)), S, atol=1e-12)


@given(unit3, unit3, vec3)
def test_err_s2_eq_ignores_omega(q, qd, w):
    a, _ = err_s2(q, qd, np.zeros(3), np.zeros(3))
    b, _ = err_s2(q, qd, w - (w @ q) * q, np.zeros(3))
    np.testing.assert_allclose(a, b)


@given(unit3, unit3)
def test_psi_q_bound(q, qd):
    if q @ qd <= 1e-9:  # angle below pi/2 only
        return
    eq, _ = err_s2(q, qd, np.zeros(3), np.zeros(3))
    assert psi_q(q, qd) <= np.linalg.norm(eq) + 1e-12
    assert 0.0 <= psi_q(q, qd) + 1e-15 <= 2.0 + 1e-15


@given(vec3, vec3)
def test_psi_R_symmetric(a, b):
    R, Rd = expm_so3(a), expm_so3(b)
    assert psi_R(R, Rd) == pytest.approx(psi_R(Rd, R), abs=1e-12)
    assert -1e-12 <= psi_R(R, Rd) <= 2 + 1e-12


@given(vec3)
def test_expm_is_rotation(w):
    assert is_rotation(expm_so3(w))


def test_orthonormalize_contracts_drift(rng):
    R = expm_so3(rng.normal(size=3)) + 1e-6 * rng.normal(size=(3, 3))
    before = ortho_error(R)
    assert ortho_error(orthonormalize(R)) < 10 * before**2 + 1e-15
    assert np.linalg.det(orthonormalize(R)) > 0
