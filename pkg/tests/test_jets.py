import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from cablequad.jets import Jet, OrderError, angular_velocity
from cablequad.signals import (AxisAngleRotation, Constant, Polynomial, Sinusoid, UnsupportedSignalError,
                               VecSignal, cosine, jet_eval, lissajous, signal_from_dict, vec_signal_from_dict)

tau = sp.Symbol("t")


def sympy_derivs(expr, t0, K):
    return np.array([float(sp.diff(expr, tau, k).subs(tau, t0)) for k in range(K + 1)])


def test_lissajous_second_derivative_at_zero():
    # a_x (2 pi f1)^2 cos(0) with a_x = 2, f1 = 1/4
    x = lissajous().jet(0.0, 4)
    assert x.deriv(2)[0] == pytest.approx(2 * (np.pi / 2) ** 2, rel=1e-14)
    np.testing.assert_allclose(x.value, [0.0, 0.0, 1.5], atol=1e-15)


@pytest.mark.parametrize("t0", [0.0, 0.37, 2.5])
def test_product_matches_sympy(t0):
    s = Sinusoid(1.3, 2.0, 0.4) * Polynomial((0.5, 0.0, 0.0, 1.0))
    expr = 1.3 * sp.sin(2 * tau + 0.4) * (0.5 + tau**3)
    np.testing.assert_allclose(s.jet(t0, 10).coeff, sympy_derivs(expr, t0, 10), rtol=1e-12, atol=1e-10)


def test_nonlinear_ops_match_sympy():
    t0, K = 0.3, 8
    u = Polynomial((1.5, 0.2, 0.3))
    ju = u.jet(t0, K)
    ue = 1.5 + 0.2 * tau + 0.3 * tau**2
    for jet, expr in ((ju.recip(), 1 / ue), (ju.sqrt(), sp.sqrt(ue)), (ju.sin(), sp.sin(ue)),
                      (ju.cos(), sp.cos(ue))):
        np.testing.assert_allclose(jet.coeff, sympy_derivs(expr, t0, K), rtol=1e-11, atol=1e-9)


def test_vector_norm_and_cross():
    v = VecSignal(Sinusoid(1.0, 1.0), cosine(1.0, 1.0), Polynomial((0.0, 1.0)))
    t0, K = 0.7, 6
    jv = v.jet(t0, K)
    ve = sp.Matrix([sp.sin(tau), sp.cos(tau), tau])
    np.testing.assert_allclose(jv.norm().coeff, sympy_derivs(sp.sqrt(1 + tau**2), t0, K), rtol=1e-11, atol=1e-10)
    c = jv.cross(jv.d().truncate(K - 1))
    ce = ve.cross(sp.diff(ve, tau))
    for i in range(3):
        np.testing.assert_allclose(c.coeff[:, i], sympy_derivs(ce[i], t0, K - 1), rtol=1e-11, atol=1e-10)


def test_batched_equals_scalar():
    t = np.array([0.0, 1.1, 4.2])
    L = lissajous()
    batch = L.jet(t, 12).tc
    for k, tk in enumerate(t):
        np.testing.assert_allclose(batch[:, k], L.jet(tk, 12).tc, rtol=1e-14, atol=1e-14)


def test_order_errors():
    j = Constant(1.0).jet(0.0, 3)
    with pytest.raises(OrderError):
        j.deriv(4)
    with pytest.raises(OrderError):
        Jet(np.zeros((1, 3))).d()


def test_unsupported_signal():
    with pytest.raises(UnsupportedSignalError):
        jet_eval(lambda t: t, 0.0, 3)
    with pytest.raises(UnsupportedSignalError):
        Constant(1.0).jet(0.0, 500)
    with pytest.raises(UnsupportedSignalError):
        signal_from_dict({"type": "spline"})


def test_signal_dict_round_trip():
    L = lissajous()
    L2 = vec_signal_from_dict(L.to_dict())
    np.testing.assert_array_equal(L.jet(1.3, 6).tc, L2.jet(1.3, 6).tc)


def test_rotation_jet_body_rate():
    # rotation about a fixed axis: body rate = angle' * axis
    Rs = AxisAngleRotation((0.0, 0.0, 2.0), Sinusoid(0.3, 0.4))
    W = angular_velocity(Rs.jet(0.8, 3))
    np.testing.assert_allclose(W.value, [0, 0, 0.3 * 0.4 * np.cos(0.4 * 0.8)], atol=1e-15)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.5, 3))
def test_product_rule(a, b, w):
    f = Sinusoid(1.0, w, a)
    g = Polynomial((b, 1.0, 0.5))
    t0 = 0.4
    fg = (f.jet(t0, 5) * g.jet(t0, 5)).coeff
    fc, gc = f.jet(t0, 5).coeff, g.jet(t0, 5).coeff
    # first and second Leibniz terms
    assert fg[1] == pytest.approx(fc[1] * gc[0] + fc[0] * gc[1], abs=1e-12)
    assert fg[2] == pytest.approx(fc[2] * gc[0] + 2 * fc[1] * gc[1] + fc[0] * gc[2], abs=1e-11)


@given(st.floats(0.5, 5.0))
def test_recip_inverts(c):
    u = Polynomial((c, 0.3, -0.1)).jet(0.2, 7)
    one = u * u.recip()
    np.testing.assert_allclose(one.tc, np.eye(8)[0], atol=1e-12)
