"""Closed library of smooth time signals with exact Taylor expansions.

Flat outputs have to be differentiated up to order ``2n + 4``; numerical
differentiation at that order is useless, so trajectories are assembled from
polynomials and sinusoids whose jets are known in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
from numpy.polynomial import polynomial as P

from .jets import Jet

MAX_ORDER = 40


class UnsupportedSignalError(TypeError):
    pass


def _check_order(K):
    if not 0 <= K <= MAX_ORDER:
        raise UnsupportedSignalError(f"jet order {K} outside the supported range 0..{MAX_ORDER}")


class Signal:
    """Scalar signal ``t -> R``."""

    def taylor(self, t, K):
        raise NotImplementedError

    def jet(self, t, K):
        _check_order(K)
        return Jet(self.taylor(np.asarray(t, dtype=float), K))

    def __call__(self, t):
        return self.taylor(np.asarray(t, dtype=float), 0)[0]

    def __add__(self, other):
        return Sum((self, as_signal(other)))

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, Signal):
            return Product(self, other)
        return Scaled(float(other), self)

    __rmul__ = __mul__

    def __neg__(self):
        return Scaled(-1.0, self)

    def __sub__(self, other):
        return self + (-as_signal(other))


@dataclass(frozen=True)
class Constant(Signal):
    c: float

    def taylor(self, t, K):
        out = np.zeros((K + 1,) + t.shape)
        out[0] = self.c
        return out

    def to_dict(self):
        return {"type": "constant", "c": self.c}


@dataclass(frozen=True)
class Polynomial(Signal):
    """``sum_k coeffs[k] t^k``."""

    coeffs: tuple

    def taylor(self, t, K):
        c = np.asarray(self.coeffs, dtype=float)
        out = np.zeros((K + 1,) + t.shape)
        for k in range(K + 1):
            if len(c) == 0:
                break
            out[k] = P.polyval(t, c) / factorial(k)
            c = P.polyder(c) if len(c) > 1 else np.zeros(0)
        return out

    def to_dict(self):
        return {"type": "polynomial", "coeffs": list(self.coeffs)}


@dataclass(frozen=True)
class Sinusoid(Signal):
    """``amp * sin(omega t + phase)``."""

    amp: float
    omega: float
    phase: float = 0.0

    def taylor(self, t, K):
        k = np.arange(K + 1).reshape((-1,) + (1,) * t.ndim)
        fact = np.array([float(factorial(i)) for i in range(K + 1)]).reshape(k.shape)
        return self.amp * self.omega**k * np.sin(self.omega * t + self.phase + k * np.pi / 2) / fact

    def to_dict(self):
        return {"type": "sinusoid", "amp": self.amp, "omega": self.omega, "phase": self.phase}


def cosine(amp, omega):
    return Sinusoid(amp, omega, np.pi / 2)


@dataclass(frozen=True)
class Sum(Signal):
    terms: tuple

    def taylor(self, t, K):
        return sum(s.taylor(t, K) for s in self.terms)

    def to_dict(self):
        return {"type": "sum", "terms": [s.to_dict() for s in self.terms]}


@dataclass(frozen=True)
class Scaled(Signal):
    k: float
    s: Signal

    def taylor(self, t, K):
        return self.k * self.s.taylor(t, K)

    def to_dict(self):
        return {"type": "scaled", "k": self.k, "signal": self.s.to_dict()}


@dataclass(frozen=True)
class Product(Signal):
    a: Signal
    b: Signal

    def taylor(self, t, K):
        return (self.a.jet(t, K) * self.b.jet(t, K)).tc

    def to_dict(self):
        return {"type": "product", "a": self.a.to_dict(), "b": self.b.to_dict()}


def as_signal(x):
    if isinstance(x, Signal):
        return x
    if isinstance(x, (int, float, np.floating, np.integer)):
        return Constant(float(x))
    raise UnsupportedSignalError(
        f"{type(x).__name__} is not a library signal; build trajectories from "
        "constants, polynomials, sinusoids, sums and products")


@dataclass(frozen=True)
class VecSignal:
    """Three scalar signals forming an R^3-valued signal."""

    x: Signal
    y: Signal
    z: Signal

    def __post_init__(self):
        for c in ("x", "y", "z"):
            object.__setattr__(self, c, as_signal(getattr(self, c)))

    def jet(self, t, K):
        _check_order(K)
        t = np.asarray(t, dtype=float)
        return Jet(np.stack([s.taylor(t, K) for s in (self.x, self.y, self.z)], axis=-1))

    def __call__(self, t):
        return self.jet(t, 0).value

    def to_dict(self):
        return {"x": self.x.to_dict(), "y": self.y.to_dict(), "z": self.z.to_dict()}


@dataclass(frozen=True)
class AxisAngleRotation:
    """``exp(angle(t) * hat(axis))`` for a fixed unit axis."""

    axis: tuple
    angle: Signal

    def __post_init__(self):
        a = np.asarray(self.axis, dtype=float)
        object.__setattr__(self, "axis", tuple(a / np.linalg.norm(a)))
        object.__setattr__(self, "angle", as_signal(self.angle))

    def jet(self, t, K):
        from .geom import hat
        th = self.angle.jet(t, K)
        s, c = th.sincos()
        A = hat(np.asarray(self.axis))
        return s.outer(A) + (1.0 - c).outer(A @ A) + np.eye(3)

    def __call__(self, t):
        return self.jet(t, 0).value

    def to_dict(self):
        return {"axis": list(self.axis), "angle": self.angle.to_dict()}


def jet_eval(signal, t, K):
    """Jet of a library signal (scalar, vector or rotation) at ``t``."""
    if not hasattr(signal, "jet") or not isinstance(signal, (Signal, VecSignal, AxisAngleRotation)):
        raise UnsupportedSignalError(f"{type(signal).__name__} is not a library signal")
    return signal.jet(t, K)


def signal_from_dict(d):
    if isinstance(d, (int, float)):
        return Constant(float(d))
    kind = d.get("type")
    if kind == "constant":
        return Constant(float(d["c"]))
    if kind == "polynomial":
        return Polynomial(tuple(float(c) for c in d["coeffs"]))
    if kind == "sinusoid":
        return Sinusoid(float(d["amp"]), float(d["omega"]), float(d.get("phase", 0.0)))
    if kind == "sum":
        return Sum(tuple(signal_from_dict(s) for s in d["terms"]))
    if kind == "scaled":
        return Scaled(float(d["k"]), signal_from_dict(d["signal"]))
    if kind == "product":
        return Product(signal_from_dict(d["a"]), signal_from_dict(d["b"]))
    raise UnsupportedSignalError(f"unknown signal type {kind!r}")


def vec_signal_from_dict(d):
    return VecSignal(*(signal_from_dict(d[c]) for c in ("x", "y", "z")))


def rotation_from_dict(d):
    return AxisAngleRotation(tuple(d["axis"]), signal_from_dict(d["angle"]))


def lissajous(ax=2.0, ay=2.5, az=1.5, f1=0.25, f2=0.2, f3=1 / 7):
    """Load path ``(ax (1 - cos 2 pi f1 t), ay sin 2 pi f2 t, az cos 2 pi f3 t)``."""
    tau = 2 * np.pi
    return VecSignal(Sum((Constant(ax), cosine(-ax, tau * f1))),
                     Sinusoid(ay, tau * f2),
                     cosine(az, tau * f3))
