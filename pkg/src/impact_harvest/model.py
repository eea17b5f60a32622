"""Parameter sets and forcing for the inclined vibro-impact harvester.

The relative coordinate ``Z`` obeys ``Z'' = f(t) + gbar`` between impacts,
where ``f`` is a period-2 forcing of unit norm and ``gbar`` the gravity term
along the incline. Barriers sit at ``Z = +d/2`` (bottom) and ``Z = -d/2`` (top).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import DomainError

TWO_PI = 2.0 * math.pi
FORCING_PERIOD = 2.0
GRAVITY = 9.8


def wrap_phase(phi: float) -> float:
    """Phase reduced to [0, 2*pi)."""
    out = math.fmod(phi, TWO_PI)
    if out < 0.0:
        out += TWO_PI
    # fmod can hand back exactly 2*pi after the correction for tiny negatives
    return 0.0 if out >= TWO_PI else out


@dataclass(frozen=True)
class PhysicalParams:
    M: float
    s: float
    omega: float
    F_norm: float
    beta: float
    g: float = GRAVITY

    def __post_init__(self):
        for name in ("M", "s", "omega", "F_norm", "beta", "g"):
            value = getattr(self, name)
            if not (value > 0.0 and math.isfinite(value)):
                raise DomainError(f"{name} must be strictly positive, got {value!r}")
        if self.beta > math.pi / 2 + 1e-15:
            raise DomainError(f"beta must lie in (0, pi/2], got {self.beta!r}")


@dataclass(frozen=True)
class SystemParams:
    """Dimensionless parameters: restitution, cylinder length, gravity, phase."""

    r: float
    d: float
    gbar: float
    phi: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.r < 1.0:
            raise DomainError(f"restitution r must lie in (0, 1), got {self.r!r}")
        if not self.d > 0.0:
            raise DomainError(f"d must be positive, got {self.d!r}")
        if not self.gbar >= 0.0:
            raise DomainError(f"gbar must be non-negative, got {self.gbar!r}")
        object.__setattr__(self, "phi", wrap_phase(float(self.phi)))

    def with_d(self, d: float) -> "SystemParams":
        return replace(self, d=d)

    def with_phi(self, phi: float) -> "SystemParams":
        return replace(self, phi=phi)

    def as_dict(self) -> dict:
        return {"r": self.r, "d": self.d, "gbar": self.gbar, "phi": self.phi}


def nondimensionalize(p: PhysicalParams, phi: float = 0.0, r: float = 0.5) -> SystemParams:
    """Map physical parameters to ``SystemParams``.

    ``d = s M omega^2 / (|F| pi^2)`` and ``gbar = M g sin(beta) / |F|``; the
    restitution coefficient is passed through unchanged.
    """
    d = p.s * p.M * p.omega ** 2 / (p.F_norm * math.pi ** 2)
    gbar = p.M * p.g * math.sin(p.beta) / p.F_norm
    return SystemParams(r=r, d=d, gbar=gbar, phi=phi)


def gbar_from(M: float, beta: float, F_norm: float, g: float = GRAVITY) -> float:
    """Gravity term alone; ``beta = 0`` (horizontal device) is allowed here."""
    if M <= 0.0 or F_norm <= 0.0 or beta < 0.0:
        raise DomainError("M and F_norm must be positive and beta non-negative")
    return M * g * math.sin(beta) / F_norm


def s_from_d(d: float, M: float, omega: float, F_norm: float) -> float:
    """Cylinder length that produces dimensionless length ``d``."""
    return d * F_norm * math.pi ** 2 / (M * omega ** 2)


Evaluator = Callable[[np.ndarray | float], np.ndarray | float]


def _cos_f(t):
    return np.cos(np.pi * t)


def _cos_F1(t):
    return np.sin(np.pi * t) / np.pi


def _cos_F2(t):
    return -np.cos(np.pi * t) / np.pi ** 2


def _zero(t):
    return 0.0 * np.asarray(t, dtype=float) if np.ndim(t) else 0.0


@dataclass(frozen=True)
class Forcing:
    """Period-2 forcing ``f`` with its first and second antiderivatives.

    The base evaluators describe the zero-phase forcing; a phase ``phi`` acts
    as the time shift ``phi / pi`` so that ``f(t) = base_f(t + phi/pi)``. For
    the cosine family this is exactly ``cos(pi t + phi)``.
    """

    base_f: Evaluator
    base_F1: Evaluator
    base_F2: Evaluator
    phi: float = 0.0
    name: str = "custom"
    period: float = field(default=FORCING_PERIOD)

    def _arg(self, t):
        return np.asarray(t, dtype=float) + self.phi / math.pi if np.ndim(t) else t + self.phi / math.pi

    def f(self, t):
        return self.base_f(self._arg(t))

    def F1(self, t):
        return self.base_F1(self._arg(t))

    def F2(self, t):
        return self.base_F2(self._arg(t))

    def df(self, t, h: float = 1e-5):
        """Derivative of ``f`` by central differences (used only for tangency checks)."""
        return (self.f(t + h) - self.f(t - h)) / (2.0 * h)

    def with_phase(self, phi: float) -> "Forcing":
        return replace(self, phi=float(phi))

    def double_integral(self, t0: float, t1: float) -> float:
        """``F2(t1) - F2(t0) - F1(t0) (t1 - t0)``, accurate for short intervals.

        Equals ``int_{t0}^{t1} (t1 - u) f(u) du``. The closed form cancels badly
        when ``t1 - t0`` is tiny, so short intervals use Gauss-Legendre.
        """
        dt = t1 - t0
        if abs(dt) > 0.05:
            return float(self.F2(t1) - self.F2(t0) - self.F1(t0) * dt)
        nodes, weights = _GL
        u = t0 + 0.5 * dt * (nodes + 1.0)
        return float(0.5 * dt * np.dot(weights, (t1 - u) * self.f(u)))

    def single_integral(self, t0: float, t1: float) -> float:
        """``F1(t1) - F1(t0)``; Gauss-Legendre on short intervals."""
        dt = t1 - t0
        if abs(dt) > 0.05:
            return float(self.F1(t1) - self.F1(t0))
        nodes, weights = _GL
        u = t0 + 0.5 * dt * (nodes + 1.0)
        return float(0.5 * dt * np.dot(weights, self.f(u)))


_GL = np.polynomial.legendre.leggauss(10)


def cosine_forcing(phi: float = 0.0) -> Forcing:
    """``f = cos(pi t + phi)``, ``F1 = sin(pi t + phi)/pi``, ``F2 = -cos(pi t + phi)/pi^2``."""
    return Forcing(_cos_f, _cos_F1, _cos_F2, phi=float(phi), name="cosine")


def zero_forcing() -> Forcing:
    """``f = 0``; useful for force-free checks. Not a unit-norm forcing."""
    return Forcing(_zero, _zero, _zero, name="zero")
