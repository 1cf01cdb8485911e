"""Truncated Taylor arithmetic for array-valued signals.

A :class:`Jet` stores normalized Taylor coefficients ``c[k] = f^(k)(t) / k!``
in an array of shape ``(K+1, *value_shape)``. The value shape may carry a
leading batch axis (one expansion per sample time) followed by the vector or
matrix dimensions; every operation acts on the trailing axes, so batched and
unbatched jets share one code path.

Products use the Cauchy rule and are exact to the truncation order; the
order of a result is the smallest order among its jet operands.
"""

from __future__ import annotations

from math import factorial

import numpy as np


class OrderError(ValueError):
    """A derivative beyond the available truncation order was requested."""


def _factorials(K):
    return np.array([float(factorial(k)) for k in range(K + 1)])


def _pad(x, ndim):
    """Append singleton axes so scalar jets broadcast against vectors."""
    return x.reshape(x.shape + (1,) * (ndim - x.ndim)) if x.ndim < ndim else x


class Jet:
    __slots__ = ("tc",)
    __array_ufunc__ = None  # make numpy defer to the reflected operators

    def __init__(self, tc):
        self.tc = np.asarray(tc, dtype=float)
        if self.tc.ndim < 1:
            raise ValueError("jet coefficients need a leading order axis")

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, value, order):
        value = np.asarray(value, dtype=float)
        tc = np.zeros((order + 1,) + value.shape)
        tc[0] = value
        return cls(tc)

    @classmethod
    def from_derivatives(cls, derivs):
        derivs = np.asarray(derivs, dtype=float)
        f = _factorials(len(derivs) - 1)
        return cls(derivs / f.reshape((-1,) + (1,) * (derivs.ndim - 1)))

    @classmethod
    def variable(cls, t, order):
        """The identity signal ``tau -> tau`` expanded about ``t``."""
        t = np.asarray(t, dtype=float)
        tc = np.zeros((order + 1,) + t.shape)
        tc[0] = t
        if order >= 1:
            tc[1] = 1.0
        return cls(tc)

    # inspection ---------------------------------------------------------
    @property
    def order(self):
        return self.tc.shape[0] - 1

    @property
    def shape(self):
        return self.tc.shape[1:]

    @property
    def value(self):
        return self.tc[0]

    @property
    def coeff(self):
        """Derivative values ``f^(k)(t)`` for ``k = 0..K``."""
        f = _factorials(self.order)
        return self.tc * f.reshape((-1,) + (1,) * (self.tc.ndim - 1))

    def deriv(self, k):
        if k > self.order:
            raise OrderError(f"derivative {k} requested from a jet of order {self.order}")
        return self.tc[k] * factorial(k)

    def require(self, k, what="signal"):
        if self.order < k:
            raise OrderError(f"{what} needs derivatives up to order {k}, jet has {self.order}")
        return self

    def d(self):
        """Time derivative; the order drops by one."""
        if self.order < 1:
            raise OrderError("cannot differentiate an order-0 jet")
        k = np.arange(1, self.order + 1).reshape((-1,) + (1,) * (self.tc.ndim - 1))
        return Jet(self.tc[1:] * k)

    def truncate(self, K):
        if K > self.order:
            raise OrderError(f"cannot raise jet order {self.order} to {K}")
        return Jet(self.tc[:K + 1])

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet(self.tc[(slice(None),) + idx])

    @property
    def T(self):
        return Jet(np.swapaxes(self.tc, -1, -2))

    def __repr__(self):
        return f"Jet(order={self.order}, shape={self.shape})"

    # linear operations --------------------------------------------------
    def _binary_linear(self, other, sign):
        if isinstance(other, Jet):
            K = min(self.order, other.order)
            a, b = self.tc[:K + 1], other.tc[:K + 1]
            nd = max(a.ndim, b.ndim)
            return Jet(_pad(a, nd) + sign * _pad(b, nd))
        other = np.asarray(other, dtype=float)
        tc = np.broadcast_to(self.tc, np.broadcast_shapes(self.tc.shape, (1,) + other.shape)).copy()
        tc[0] = tc[0] + sign * other
        return Jet(tc)

    def __add__(self, other):
        return self._binary_linear(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary_linear(other, -1.0)

    def __rsub__(self, other):
        return (-self)._binary_linear(other, 1.0)

    def __neg__(self):
        return Jet(-self.tc)

    # products -----------------------------------------------------------
    def _cauchy(self, other, op):
        K = min(self.order, other.order)
        a, b = self.tc[:K + 1], other.tc[:K + 1]
        out = [op(a[:k + 1], b[k::-1]).sum(axis=0) for k in range(K + 1)]
        return Jet(np.stack(out))

    def __mul__(self, other):
        if isinstance(other, Jet):
            nd = max(self.tc.ndim, other.tc.ndim)
            return self._cauchy(other, lambda x, y: _pad(x, nd) * _pad(y, nd))
        return Jet(self.tc * np.asarray(other, dtype=float))

    __rmul__ = __mul__

    def outer(self, const):
        """Scalar jet times a constant array; the value shape grows by ``const.shape``."""
        const = np.asarray(const, dtype=float)
        return Jet(self.tc.reshape(self.tc.shape + (1,) * const.ndim) * const)

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.recip()
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return self.recip() * other

    def matmul(self, other):
        if isinstance(other, Jet):
            return self._cauchy(other, np.matmul)
        return Jet(self.tc @ np.asarray(other, dtype=float))

    __matmul__ = matmul

    def matvec(self, other):
        """Matrix jet applied to a vector (jet or constant), batched."""
        if isinstance(other, Jet):
            return self._cauchy(other, lambda A, x: np.einsum("...ij,...j->...i", A, x))
        return Jet(np.einsum("...ij,...j->...i", self.tc, np.asarray(other, dtype=float)))

    def __rmatmul__(self, other):
        return Jet(np.asarray(other, dtype=float) @ self.tc)

    def dot(self, other):
        """Inner product over the trailing axis."""
        if isinstance(other, Jet):
            return self._cauchy(other, lambda x, y: np.sum(x * y, axis=-1))
        return Jet(np.sum(self.tc * np.asarray(other, dtype=float), axis=-1))

    def cross(self, other):
        if isinstance(other, Jet):
            return self._cauchy(other, lambda x, y: np.cross(x, y))
        return Jet(np.cross(self.tc, np.asarray(other, dtype=float)))

    def rcross(self, other):
        """``other x self`` for a constant ``other``."""
        return Jet(np.cross(np.asarray(other, dtype=float), self.tc))

    # nonlinear scalar functions -------------------------------------------
    def recip(self):
        a = self.tc
        b = np.empty_like(a)
        b[0] = 1.0 / a[0]
        for k in range(1, self.order + 1):
            b[k] = -b[0] * np.sum(a[1:k + 1] * b[k - 1::-1], axis=0)
        return Jet(b)

    def sqrt(self):
        a = self.tc
        s = np.empty_like(a)
        s[0] = np.sqrt(a[0])
        # a zero value gives inf/nan coefficients; callers guard the value itself
        with np.errstate(divide="ignore", invalid="ignore"):
            for k in range(1, self.order + 1):
                acc = a[k] - np.sum(s[1:k] * s[k - 1:0:-1], axis=0)
                s[k] = acc / (2.0 * s[0])
        return Jet(s)

    def sincos(self):
        u = self.tc
        s = np.empty_like(u)
        c = np.empty_like(u)
        s[0], c[0] = np.sin(u[0]), np.cos(u[0])
        for k in range(1, self.order + 1):
            j = np.arange(1, k + 1).reshape((-1,) + (1,) * (u.ndim - 1))
            ju = j * u[1:k + 1]
            s[k] = np.sum(ju * c[k - 1::-1], axis=0) / k
            c[k] = -np.sum(ju * s[k - 1::-1], axis=0) / k
        return Jet(s), Jet(c)

    def sin(self):
        return self.sincos()[0]

    def cos(self):
        return self.sincos()[1]

    def norm(self):
        """Euclidean norm over the trailing axis."""
        return self.dot(self).sqrt()

    def normalized(self):
        return self / self.norm()

    # helpers for 3-vectors -------------------------------------------------
    def hat(self):
        from .geom import hat
        return Jet(hat(self.tc))

    def vee(self):
        M = self.tc
        return Jet(np.stack([M[..., 2, 1], M[..., 0, 2], M[..., 1, 0]], axis=-1))


def stack(jets, axis=-1):
    """Stack jets along a new value axis (counted on the value shape)."""
    K = min(j.order for j in jets)
    ax = axis if axis < 0 else axis + 1
    return Jet(np.stack([j.tc[:K + 1] for j in jets], axis=ax))


def angular_velocity(R):
    """Body angular velocity jet ``vee(R^T R')`` of a rotation jet."""
    return (R.T @ R.d()).vee()
