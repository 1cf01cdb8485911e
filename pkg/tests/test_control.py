import numpy as np
import pytest
from scipy.integrate import solve_ivp

from cablequad.control import (GainTable, HorizonError, LinearizationTable, LqrWeights, RiccatiBlowup,
                               default_q1, riccati_backward, run_closed_loop, tracking_control)
from cablequad.flatness import flat_single


def scalar_weights(T=5.0, pT=0.0):
    return LqrWeights(np.eye(1), np.eye(1), pT * np.eye(1), T)


def test_scalar_tanh():
    table = riccati_backward(lambda t: (np.zeros((1, 1)), np.ones((1, 1))), scalar_weights(), 0.01)
    exact = np.tanh(5.0 - table.t)
    np.testing.assert_allclose(table.P[:, 0, 0], exact, atol=1e-8)
    k = int(round(3.0 / 0.01))
    assert table.P[k, 0, 0] == pytest.approx(0.96403, abs=5e-6)


def A_tv(t):
    return np.array([[0.0, 1.0], [-1.0 - 0.5 * np.sin(t), -0.1]])


def test_lyapunov_transport():
    T = 3.0
    PT = np.array([[2.0, 0.3], [0.3, 1.0]])
    w = LqrWeights(np.zeros((2, 2)), np.eye(1), PT, T)
    table = riccati_backward(lambda t: (A_tv(t), np.zeros((2, 1))), w, 0.01)

    def rhs(t, x):
        return (A_tv(t) @ x.reshape(2, 2)).ravel()

    sol = solve_ivp(rhs, (0, T), np.eye(2).ravel(), rtol=1e-12, atol=1e-13, dense_output=True)
    XT = sol.sol(T).reshape(2, 2)
    for t in (0.0, 1.0, 2.5):
        Phi = XT @ np.linalg.inv(sol.sol(t).reshape(2, 2))
        k = int(round(t / 0.01))
        np.testing.assert_allclose(table.P[k], Phi.T @ PT @ Phi, rtol=1e-7, atol=1e-9)  # RK4 at dt=0.01


def test_riccati_residual_consistency():
    B = np.array([[0.0], [1.0]])
    w = LqrWeights(np.eye(2), np.eye(1), np.zeros((2, 2)), 4.0)
    table = riccati_backward(lambda t: (A_tv(t), B), w, 0.01)
    for k in range(5, len(table.t) - 5, 37):
        dP = (table.P[k + 1] - table.P[k - 1]) / 0.02
        P = table.P[k]
        A = A_tv(table.t[k])
        rhs = -(np.eye(2) - P @ B @ B.T @ P + A.T @ P + P @ A)
        assert np.linalg.norm(dP - rhs) <= 1e-3 * max(np.linalg.norm(rhs), 1e-12)
    # monotone horizon effect
    assert np.linalg.eigvalsh(table.P[0]).min() > 0


def test_psd_violation_reported():
    # negative state weight drives P indefinite
    w = LqrWeights.__new__(LqrWeights)
    w.Q1, w.Q2, w.P_T, w.T = -np.eye(1), np.eye(1), np.zeros((1, 1)), 1.0
    with pytest.raises(RiccatiBlowup) as exc:
        riccati_backward(lambda t: (np.zeros((1, 1)), np.zeros((1, 1))), w, 0.01)
    assert exc.value.t == pytest.approx(0.99)


def test_weights_validation():
    with pytest.raises(ValueError):
        LqrWeights(np.eye(2), np.zeros((1, 1)), np.eye(2), 1.0)
    with pytest.raises(ValueError):
        LqrWeights(np.eye(2), np.eye(1), np.eye(3), 1.0)
    Q1 = default_q1(5)
    assert Q1.shape == (42, 42)
    assert np.trace(Q1) == pytest.approx(0.5 * 6 + 0.75 * 6 + 15 + 0.75 * 15)


def test_gain_interpolation(tmp_path):
    B = np.array([[0.0], [1.0]])
    w = LqrWeights(np.eye(2), np.eye(1), np.zeros((2, 2)), 2.0)
    table = riccati_backward(lambda t: (A_tv(t), B), w, 0.01)
    np.testing.assert_array_equal(table.gain(0.5), table.K[50])
    np.testing.assert_allclose(table.gain(0.505), 0.5 * (table.K[50] + table.K[51]), rtol=1e-12)
    np.testing.assert_array_equal(table.gain(2.0), 0.0)  # P_T = 0 gives K(T) = 0
    with pytest.raises(HorizonError):
        table.gain(2.1)
    with pytest.raises(HorizonError):
        table.gain(-0.1)
    for name in ("g.npz", "g.json"):
        table.save(tmp_path / name)
        t2 = GainTable.load(tmp_path / name)
        np.testing.assert_array_equal(t2.K, table.K)
        np.testing.assert_array_equal(t2.P, table.P)


@pytest.fixture(scope="module")
def hover_table(qp, cp5, fo_hover):
    lt = LinearizationTable(fo_hover, qp, cp5, 3.0, 0.01)
    return riccati_backward(lt, LqrWeights.default(5, T=3.0), 0.01)


def test_full_size_sweep_symmetric_psd(hover_table):
    assert hover_table.P.shape == (301, 42, 42)
    np.testing.assert_allclose(hover_table.P[-1], 0.01 * np.eye(42))
    for P in hover_table.P[::20]:
        np.testing.assert_array_equal(P, P.T)
        assert np.linalg.eigvalsh(P)[0] >= -1e-8


def test_tracking_control_exact(qp, cp5, fo_hover, hover_table):
    dp = flat_single(fo_hover, qp, cp5, 0.0)
    u, du, s = tracking_control(dp.state, dp, hover_table, 0.0)
    assert u.f == dp.f
    np.testing.assert_array_equal(u.M, dp.M)


@pytest.mark.parametrize("sign", [1.0, -1.0])
def test_thrust_restores_height(qp, cp5, fo_hover, hover_table, sign):
    dp = flat_single(fo_hover, qp, cp5, 0.0)
    s = dp.state.copy()
    s.x0 = s.x0 + sign * 1e-3 * np.array([0.0, 0.0, 1.0])
    _, du, _ = tracking_control(s, dp, hover_table, 0.0)
    assert np.sign(du[0]) == -sign  # above the reference: less thrust


def test_closed_loop_hover_recovers(qp, cp5, fo_hover, hover_table):
    dp = flat_single(fo_hover, qp, cp5, 0.0)
    s = dp.state.copy()
    s.x0 = s.x0 + np.array([0.05, -0.05, 0.05])
    log = run_closed_loop(s, fo_hover, qp, cp5, hover_table, dt=2e-3, T=3.0)
    dx = np.linalg.norm(log.s[:, 6:9], axis=1)
    assert dx[-1] < 0.3 * dx[0]
    assert np.linalg.norm(log.s[-1]) < 0.5 * np.linalg.norm(log.s[0])
