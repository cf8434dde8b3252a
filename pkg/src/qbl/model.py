"""Right-hand sides, Jacobians and rotation determinants of the quartic
predator-prey family

    x' = x((1 - lam x) A(x) - y)                 = P
    y' = -y((delta + mu y) A(x) - x)             = Q,     A(x) = alpha x^2 + beta x + 1

together with its rotated companion ``x' = P - gamma Q, y' = Q + gamma P``.

Every function here is a pure function of a :class:`ModelParams` and a phase
point. Scalar inputs give float outputs; numpy arrays broadcast.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

__all__ = [
    "ModelParams",
    "PhasePoint",
    "FieldValue",
    "Jacobian2",
    "PoleError",
    "eval_field",
    "eval_rotated_field",
    "response",
    "prey_isocline",
    "predator_isocline",
    "eval_jacobian",
    "rotation_determinants",
    "ellipse_residual",
    "divergence",
]


class PoleError(ZeroDivisionError):
    """The response function denominator vanishes."""


@dataclass(frozen=True)
class ModelParams:
    """Model parameters plus the field rotation parameter ``gamma``.

    ``lam`` is the prey competition rate (``lambda`` is reserved in Python).
    Construction enforces ``alpha >= 0, delta > 0, lam > 0, mu >= 0`` and
    ``beta >= -2 sqrt(alpha)`` (the boundary is admitted so that
    ``alpha = beta = 0`` and the double root of ``A`` are representable).
    The cubic stage with ``beta < 0`` lies outside that bound, so
    ``strict=False`` waives this one check and nothing else.
    """

    alpha: float = 0.0
    beta: float = 0.0
    delta: float = 0.5
    lam: float = 1.0
    mu: float = 0.5
    gamma: float = 0.0
    strict: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        for name in ("alpha", "beta", "delta", "lam", "mu", "gamma"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
            object.__setattr__(self, name, v)
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.delta <= 0:
            raise ValueError(f"delta must be > 0, got {self.delta}")
        if self.lam <= 0:
            raise ValueError(f"lam must be > 0, got {self.lam}")
        if self.mu < 0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")
        if self.strict and not self.beta >= -2.0 * math.sqrt(self.alpha):
            raise ValueError(
                f"beta must be >= -2*sqrt(alpha) = {-2.0 * math.sqrt(self.alpha)}, got {self.beta}"
            )

    @property
    def stage(self) -> str:
        """'quadratic' (alpha = beta = 0), 'cubic' (alpha = 0) or 'quartic'."""
        if self.alpha != 0.0:
            return "quartic"
        if self.beta != 0.0:
            return "cubic"
        return "quadratic"

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def as_array(self) -> np.ndarray:
        """Packed ``[alpha, beta, delta, lam, mu, gamma]`` for the compiled kernels."""
        return np.array([self.alpha, self.beta, self.delta, self.lam, self.mu, self.gamma])

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("alpha", "beta", "delta", "lam", "mu", "gamma")}


class PhasePoint(NamedTuple):
    x: float
    y: float


class FieldValue(NamedTuple):
    dx: float
    dy: float


@dataclass(frozen=True)
class Jacobian2:
    pxx: float
    pxy: float
    qyx: float
    qyy: float

    @property
    def trace(self) -> float:
        return self.pxx + self.qyy

    @property
    def determinant(self) -> float:
        return self.pxx * self.qyy - self.pxy * self.qyx

    @property
    def eigenvalues(self) -> tuple[complex, complex]:
        """Roots of ``z^2 - tr z + det``, larger real part first."""
        tr, det = self.trace, self.determinant
        disc = tr * tr - 4.0 * det
        if disc >= 0:
            sq = math.sqrt(disc)
            # avoid cancellation in the smaller root
            big = 0.5 * (tr + math.copysign(sq, tr)) if tr != 0 else 0.5 * sq
            if big != 0:
                pair = sorted((big, det / big), reverse=True)
            else:
                pair = [0.5 * sq, -0.5 * sq]
            return complex(pair[0]), complex(pair[1])
        sq = math.sqrt(-disc)
        return complex(0.5 * tr, 0.5 * sq), complex(0.5 * tr, -0.5 * sq)

    def as_array(self) -> np.ndarray:
        return np.array([[self.pxx, self.pxy], [self.qyx, self.qyy]])


def _a(p: ModelParams, x):
    return (p.alpha * x + p.beta) * x + 1.0


def eval_field(p: ModelParams, pt) -> FieldValue:
    x, y = pt
    a = _a(p, x)
    return FieldValue(x * ((1.0 - p.lam * x) * a - y), -y * ((p.delta + p.mu * y) * a - x))


def eval_rotated_field(p: ModelParams, pt) -> FieldValue:
    P, Q = eval_field(p, pt)
    g = p.gamma
    return FieldValue(P - g * Q, Q + g * P)


def response(p: ModelParams, x: float) -> float:
    """Scaled non-monotonic functional response ``x / A(x)``."""
    a = _a(p, x)
    if a == 0:
        raise PoleError(f"response has a pole at x={x}")
    return x / a


def prey_isocline(p: ModelParams, x):
    """Nontrivial zero set of P: ``y = (1 - lam x) A(x)``."""
    return (1.0 - p.lam * x) * _a(p, x)


def predator_isocline(p: ModelParams, x):
    """Nontrivial zero set of Q solved for y: ``y = (x / A(x) - delta) / mu``.

    Undefined (returns nan) when mu = 0, where the isocline is the curve
    ``delta A(x) = x`` of vertical lines instead.
    """
    x = np.asarray(x, dtype=float)
    if p.mu == 0:
        return np.full_like(x, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (x / _a(p, x) - p.delta) / p.mu


def _partials(p: ModelParams, x, y):
    a = _a(p, x)
    ap = 2.0 * p.alpha * x + p.beta
    one_m = 1.0 - p.lam * x
    pred = p.delta + p.mu * y
    px = one_m * a - y + x * (one_m * ap - p.lam * a)
    py = -x
    qx = -y * (pred * ap - 1.0)
    qy = x - pred * a - p.mu * y * a
    return px, py, qx, qy


def eval_jacobian(p: ModelParams, pt, rotated: bool = False) -> Jacobian2:
    px, py, qx, qy = _partials(p, *pt)
    if rotated:
        g = p.gamma
        return Jacobian2(px - g * qx, py - g * qy, qx + g * px, qy + g * py)
    return Jacobian2(px, py, qx, qy)


def divergence(p: ModelParams, pt, rotated: bool = True):
    """Divergence of the (rotated) field; ``Px + Qy + gamma (Py - Qx)``."""
    px, py, qx, qy = _partials(p, *pt)
    if rotated:
        return px + qy + p.gamma * (py - qx)
    return px + qy


def ellipse_residual(p: ModelParams, pt):
    """``y (delta + mu y) - x (1 - lam x)``; zero on the rotation ellipse."""
    x, y = pt
    return y * (p.delta + p.mu * y) - x * (1.0 - p.lam * x)


def rotation_determinants(p: ModelParams, pt):
    """Rotation determinants ``(d_alpha, d_beta, d_gamma)`` at a point.

    ``d_alpha = x^3 y E``, ``d_beta = x^2 y E`` and ``d_gamma = P^2 + Q^2``.
    """
    x, y = pt
    e = ellipse_residual(p, pt)
    d_beta = x * x * y * e
    d_alpha = x * d_beta
    P, Q = eval_field(p, pt)
    return d_alpha, d_beta, P * P + Q * Q
