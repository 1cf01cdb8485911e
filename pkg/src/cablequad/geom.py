"""Manifold primitives on S^2 and SO(3).

All 3x3 matrices are plain row-major numpy arrays acting on column vectors,
so ``R @ v`` maps body coordinates into the inertial frame.
"""

from __future__ import annotations

import numpy as np

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])

SKEW_TOL = 1e-8
UNIT_TOL = 1e-9
ANTIPODAL_PSI = 2.0 - 1e-6


class SymmetryError(ValueError):
    """Raised when ``vee`` receives a matrix that is not skew-symmetric."""


def cross(a, b):
    """Batched cross product over the trailing axis.

    Same result as ``np.cross`` for 3-vectors, without its axis juggling,
    which dominates the cost on single vectors.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0], axis=-1)


def hat(v):
    """Skew matrix with ``hat(v) @ w == cross(v, w)``.

    Accepts a single vector or any stack of vectors with trailing axis 3.
    """
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape + (3,))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def vee(M, check=True):
    """Inverse of :func:`hat`.

    Raises SymmetryError if ``M + M^T`` exceeds ``SKEW_TOL`` entrywise and
    ``check`` is set.
    """
    M = np.asarray(M, dtype=float)
    if check:
        asym = np.max(np.abs(M + np.swapaxes(M, -1, -2)), initial=0.0)
        if asym > SKEW_TOL:
            raise SymmetryError(f"matrix is not skew-symmetric (|M + M^T| = {asym:.3e})")
    return np.stack([M[..., 2, 1], M[..., 0, 2], M[..., 1, 0]], axis=-1)


def skew_part_vee(M):
    """vee of the skew-symmetric part of ``M``."""
    M = np.asarray(M, dtype=float)
    return vee(0.5 * (M - np.swapaxes(M, -1, -2)), check=False)


def expm_so3(w):
    """Rodrigues formula for ``exp(hat(w))``."""
    w = np.asarray(w, dtype=float)
    th = np.linalg.norm(w)
    W = hat(w)
    if th < 1e-8:
        # series to third order keeps this exact at double precision
        return np.eye(3) + W + 0.5 * W @ W
    return np.eye(3) + np.sin(th) / th * W + (1.0 - np.cos(th)) / th**2 * (W @ W)


def rotate_unit(q, w):
    """Rotate a direction ``q`` by ``exp(hat(w))``."""
    return expm_so3(w) @ np.asarray(q, dtype=float)


def rot_axis(axis, angle):
    axis = np.asarray(axis, dtype=float)
    return expm_so3(angle * axis / np.linalg.norm(axis))


def err_s2(q, q_d, omega, omega_d):
    """Direction and angular-velocity errors on S^2.

    ``e_q = q_d x q`` and ``e_omega = omega + hat(q)^2 omega_d``; the second
    is the projection of ``omega - omega_d`` on the tangent plane at ``q``.
    """
    q = np.asarray(q, dtype=float)
    q_d = np.asarray(q_d, dtype=float)
    omega = np.asarray(omega, dtype=float)
    omega_d = np.asarray(omega_d, dtype=float)
    e_q = np.cross(q_d, q)
    qh = hat(q)
    e_w = omega + qh @ (qh @ omega_d)
    return e_q, e_w


def err_so3(R, R_d, Omega, Omega_d, return_flag=False):
    """Attitude error ``0.5 vee(R_d^T R - R^T R_d)`` and ``Omega - R^T R_d Omega_d``.

    With ``return_flag`` a third value reports whether the pair sits near the
    antipodal set where ``e_R`` loses rank (``psi_R`` close to 2).
    """
    R = np.asarray(R, dtype=float)
    R_d = np.asarray(R_d, dtype=float)
    E = R_d.T @ R
    e_R = 0.5 * vee(E - E.T, check=False)
    e_W = np.asarray(Omega, dtype=float) - R.T @ R_d @ np.asarray(Omega_d, dtype=float)
    if return_flag:
        return e_R, e_W, bool(psi_R(R, R_d) > ANTIPODAL_PSI)
    return e_R, e_W


def psi_q(q, q_d):
    """Direction configuration error ``1 - q . q_d`` in [0, 2]; batched over leading axes."""
    out = 1.0 - np.sum(np.asarray(q, dtype=float) * np.asarray(q_d, dtype=float), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def psi_R(R, R_d):
    """Attitude configuration error ``0.5 tr(I - R_d^T R)`` in [0, 2]."""
    R = np.asarray(R, dtype=float)
    R_d = np.asarray(R_d, dtype=float)
    out = 0.5 * (3.0 - np.sum(R_d * R, axis=(-2, -1)))
    return float(out) if np.ndim(out) == 0 else out


def orthonormalize(R):
    """One Newton step of the polar projection, ``R (3I - R^T R) / 2``.

    Quadratically convergent, so a single step removes integrator drift of
    order 1e-8 down to roundoff.
    """
    R = np.asarray(R, dtype=float)
    return 0.5 * R @ (3.0 * np.eye(3) - R.T @ R)


def normalize(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def project_tangent(omega, q):
    """Remove the component of ``omega`` along the unit vector ``q``."""
    omega = np.asarray(omega, dtype=float)
    q = np.asarray(q, dtype=float)
    return omega - np.sum(omega * q, axis=-1, keepdims=True) * q


def is_rotation(R, tol=UNIT_TOL):
    R = np.asarray(R, dtype=float)
    return bool(np.max(np.abs(R.T @ R - np.eye(3))) <= tol and np.linalg.det(R) > 0)


def ortho_error(R):
    R = np.asarray(R, dtype=float)
    return float(np.max(np.abs(R.T @ R - np.eye(3))))
