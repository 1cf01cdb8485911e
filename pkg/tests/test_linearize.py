import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cablequad.dynamics import mass_coeffs
from cablequad.flatness import flat_single
from cablequad.geom import E1, E3, hat, rot_axis
from cablequad.linearize import (block_errors, build_lin, error_coords, finite_diff_lin, layout,
                                 mass_matrix_N, perturbed_state, propagate_linear, state_dim)


@pytest.fixture(scope="module")
def hover_lin(qp, cp5, fo_hover):
    dp = flat_single(fo_hover, qp, cp5, 0.0)
    return dp, build_lin(dp, qp, cp5)


def test_hover_blocks(hover_lin):
    dp, lin = hover_lin
    b = lin.blocks
    np.testing.assert_allclose(b.Delta2, -1.35 * 9.81 * hat(E3), rtol=1e-14)
    np.testing.assert_allclose(b.b, 0.0, atol=1e-15)
    np.testing.assert_allclose(b.alpha, 0.0, atol=1e-15)
    for beta in b.beta:
        np.testing.assert_allclose(beta, np.diag([1.0, 1.0, 0.0]), atol=1e-15)


def test_hover_fd_structure(qp, cp5, hover_lin):
    dp, lin = hover_lin
    A_fd, B_fd = finite_diff_lin(dp, qp, cp5)
    L = layout(5)
    np.testing.assert_allclose(A_fd[L["dx0"], L["dv0"]], np.eye(3), atol=1e-8)
    N = mass_matrix_N(dp.q, mass_coeffs(qp, cp5))
    rhs = np.zeros(18)
    rhs[2] = 1.0
    np.testing.assert_allclose(B_fd[9 + 15:, 0], np.linalg.solve(N, rhs), atol=1e-8)


def test_block_invariants(ref_point, qp, cp5):
    lin = build_lin(ref_point, qp, cp5)
    for i in range(5):
        np.testing.assert_array_equal(lin.blocks.d[i, i], 0.0)
        assert np.linalg.matrix_rank(lin.blocks.beta[i]) == 2
    assert np.linalg.matrix_rank(lin.B) == 4
    row = np.zeros((3, state_dim(5)))
    row[:, layout(5)["dv0"]] = np.eye(3)
    np.testing.assert_array_equal(lin.A[6:9], row)
    # only J^-1 moment rows and the thrust column through N^-1 are nonzero
    assert np.all(lin.B[:3] == 0) and np.all(lin.B[6:24] == 0)
    assert np.all(lin.B[3:6, 0] == 0)
    assert np.all(lin.B[24:, 1:] == 0)


def test_against_finite_differences(ref_point, qp, cp5):
    lin = build_lin(ref_point, qp, cp5)
    A_fd, B_fd = finite_diff_lin(ref_point, qp, cp5)
    assert max(block_errors(lin.A, A_fd, 5).values()) < 1e-4
    assert max(block_errors(lin.B, B_fd, 5).values()) < 1e-4


@pytest.mark.parametrize("n", [1, 2, 3])
def test_other_link_counts(n, qp, fo_liss):
    from cablequad.dynamics import CableParams
    cp = CableParams.uniform(n, 0.15, 0.3)
    dp = flat_single(fo_liss, qp, cp, 2.2)
    lin = build_lin(dp, qp, cp)
    A_fd, B_fd = finite_diff_lin(dp, qp, cp)
    assert max(block_errors(lin.A, A_fd, n).values()) < 1e-4


def test_fd_step_range(ref_point, qp, cp5):
    with pytest.raises(ValueError):
        finite_diff_lin(ref_point, qp, cp5, h=1e-2)


def test_error_coords_examples(hover_lin):
    dp, _ = hover_lin
    np.testing.assert_array_equal(error_coords(dp.state, dp), 0.0)
    s = dp.state.copy()
    q = s.q.copy()
    q[2] = rot_axis(E1, 0.1) @ q[2]
    s.q = q
    xi = error_coords(s, dp)[layout(5)["xi"][2]]
    assert np.linalg.norm(xi) == pytest.approx(np.sin(0.1), rel=1e-14)


@given(st.integers(0, 2**31))
def test_error_coords_first_order(seed):
    from cablequad.dynamics import CableParams, QuadParams
    from cablequad.signals import Constant, lissajous
    from cablequad.flatness import FlatOutputsSingle
    rng = np.random.default_rng(seed)
    dp = flat_single(FlatOutputsSingle(lissajous(), Constant(0.0)), QuadParams(), CableParams.uniform(3),
                     float(rng.uniform(0, 30)))
    C = build_lin(dp, QuadParams(), CableParams.uniform(3)).C
    d = rng.normal(size=state_dim(3))
    d -= np.linalg.pinv(C) @ (C @ d)  # admissible direction
    errs = [np.linalg.norm(error_coords(perturbed_state(dp, e * d), dp) - e * d) for e in (1e-3, 5e-4)]
    assert errs[0] < 1e-4 * np.linalg.norm(d) ** 2 * 10
    # at least second order (third along admissible directions)
    assert errs[0] / errs[1] > 3.0


def test_constraint_rows_vanish(ref_point, qp, cp5, rng):
    C = build_lin(ref_point, qp, cp5).C
    d = rng.normal(size=state_dim(5))
    d -= np.linalg.pinv(C) @ (C @ d)
    s = error_coords(perturbed_state(ref_point, 1e-3 * d), ref_point)
    assert np.abs(C[:5] @ s).max() < 1e-12  # xi_i . q_id = 0 exactly


def test_constraint_drift_linear_flow(qp, cp5, fo_liss, rng):
    dt = 0.01
    tt = np.arange(0, 201) * dt / 2
    ref = flat_single(fo_liss, qp, cp5, tt)
    lins = [build_lin(ref[k], qp, cp5) for k in range(len(tt))]

    def A_of_t(t):
        return lins[int(round(t / (dt / 2)))].A

    s0 = rng.normal(size=state_dim(5))
    s0 -= np.linalg.pinv(lins[0].C) @ (lins[0].C @ s0)
    s0 /= np.linalg.norm(s0)
    t, S = propagate_linear(A_of_t, s0, 0.0, 1.0, dt)
    drift = max(np.abs(lins[2 * k].C @ S[k]).max() for k in range(len(t)))
    assert drift < 1e-6
