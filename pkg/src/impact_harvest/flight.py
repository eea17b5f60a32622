"""Closed-form flight between impacts, impact law, event location, basic maps.

Velocities attached to an impact are pre-impact values unless named ``v_post``.
A bottom impact (``Z = +d/2``) is approached with ``Zdot > 0`` and a top impact
(``Z = -d/2``) with ``Zdot < 0``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import Chatter, DomainError, NoImpact
from .model import FORCING_PERIOD, Forcing, SystemParams, wrap_phase

H_SCAN = FORCING_PERIOD / 64.0
POS_TOL = 1e-12
V_GRAZ = 1e-6
T_EPS = 1e-10
_SMALL_DT = 0.05


class Side(str, enum.Enum):
    BOTTOM = "B"
    TOP = "T"

    @property
    def sign(self) -> float:
        return 1.0 if self is Side.BOTTOM else -1.0

    def z(self, d: float) -> float:
        return 0.5 * d * self.sign


class MapKind(str, enum.Enum):
    P1 = "P1"  # bottom -> bottom
    P2 = "P2"  # bottom -> top
    P3 = "P3"  # top -> bottom
    P4 = "P4"  # top -> top

    @property
    def sides(self) -> tuple[Side, Side]:
        return _MAP_SIDES[self]

    @property
    def offset(self) -> float:
        """Sign of the position jump ``D_l`` in units of ``d``."""
        return _MAP_OFFSET[self]

    @classmethod
    def between(cls, a: Side, b: Side) -> "MapKind":
        for kind, sides in _MAP_SIDES.items():
            if sides == (a, b):
                return kind
        raise DomainError(f"no map between {a} and {b}")  # pragma: no cover


_MAP_SIDES = {
    MapKind.P1: (Side.BOTTOM, Side.BOTTOM),
    MapKind.P2: (Side.BOTTOM, Side.TOP),
    MapKind.P3: (Side.TOP, Side.BOTTOM),
    MapKind.P4: (Side.TOP, Side.TOP),
}
_MAP_OFFSET = {MapKind.P1: 0.0, MapKind.P2: -1.0, MapKind.P3: 1.0, MapKind.P4: 0.0}


@dataclass(frozen=True)
class ImpactEvent:
    t: float
    side: Side
    v_pre: float
    v_post: float
    phase: float
    grazing: bool = False

    def z(self, d: float) -> float:
        return self.side.z(d)

    @classmethod
    def make(cls, t: float, side: Side, v_pre: float, params: SystemParams,
             forcing: Forcing) -> "ImpactEvent":
        return cls(
            t=float(t),
            side=side,
            v_pre=float(v_pre),
            v_post=apply_impact(v_pre, params.r),
            phase=wrap_phase(math.pi * t + forcing.phi),
            grazing=abs(v_pre) < V_GRAZ,
        )

    def as_row(self) -> dict:
        return {"t": self.t, "side": self.side.value, "v_pre": self.v_pre,
                "v_post": self.v_post, "phase": self.phase}


def apply_impact(v_pre: float, r: float) -> float:
    """Velocity jump at a rigid barrier: ``v_post = -r v_pre``."""
    return -r * v_pre


def flight_state(t0: float, z0: float, w0: float, t: float, params: SystemParams,
                 forcing: Forcing) -> tuple[float, float]:
    """Position and velocity at ``t`` of a flight launched at ``(t0, z0, w0)``."""
    dt = t - t0
    zdot = w0 + params.gbar * dt + forcing.single_integral(t0, t)
    z = z0 + w0 * dt + 0.5 * params.gbar * dt * dt + forcing.double_integral(t0, t)
    return z, zdot


def flight_eval(prev: ImpactEvent, t: float, params: SystemParams,
                forcing: Forcing) -> tuple[float, float]:
    """``(Z, Zdot)`` at time ``t`` after the impact ``prev``."""
    if t < prev.t:
        raise DomainError(f"t={t} precedes the impact at t={prev.t}")
    return flight_state(prev.t, prev.z(params.d), prev.v_post, t, params, forcing)


def flight_arrays(t0: float, z0: float, w0: float, ts: np.ndarray, params: SystemParams,
                  forcing: Forcing) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised closed form; use ``flight_state`` for intervals shorter than ~0.05."""
    ts = np.asarray(ts, dtype=float)
    dt = ts - t0
    f1_0 = forcing.F1(t0)
    zdot = w0 + params.gbar * dt + forcing.F1(ts) - f1_0
    z = z0 + w0 * dt + 0.5 * params.gbar * dt * dt + forcing.F2(ts) - forcing.F2(t0) - f1_0 * dt
    return z, zdot


@dataclass(frozen=True)
class FlightSegment:
    start: ImpactEvent
    end: ImpactEvent
    params: SystemParams
    forcing: Forcing

    def state(self, t: float) -> tuple[float, float]:
        return flight_eval(self.start, t, self.params, self.forcing)

    def sample(self, n: int = 256) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        ts = np.linspace(self.start.t, self.end.t, n)
        z, zdot = flight_arrays(self.start.t, self.start.z(self.params.d), self.start.v_post,
                                ts, self.params, self.forcing)
        return ts, z, zdot


class _Gap:
    """Signed distance past a barrier (positive = penetrated).

    For the barrier the flight starts on, the gap is divided by the elapsed
    time so that the trivial root at launch disappears.
    """

    def __init__(self, side: Side, t0, z0, w0, divided, params, forcing):
        self.side = side
        self.t0, self.z0, self.w0 = t0, z0, w0
        self.divided = divided
        self.params = params
        self.forcing = forcing
        self.zb = side.z(params.d)

    def __call__(self, t: float) -> float:
        s = self.side.sign
        dt = t - self.t0
        if self.divided:
            di = self.forcing.double_integral(self.t0, t)
            return s * (self.w0 + 0.5 * self.params.gbar * dt + di / dt)
        z, _ = flight_state(self.t0, self.z0, self.w0, t, self.params, self.forcing)
        return s * (z - self.zb)

    def signs(self, ts: np.ndarray, z: np.ndarray) -> np.ndarray:
        s = self.side.sign
        vals = s * (z - self.zb)
        if self.divided:
            vals = vals / (ts - self.t0)
            near = (ts - self.t0) < _SMALL_DT
            for i in np.flatnonzero(near):
                vals[i] = self(float(ts[i]))
        return vals


def _polish(t: float, a: float, b: float, side: Side, t0, z0, w0, params, forcing) -> float:
    zb = side.z(params.d)
    for _ in range(3):
        z, zdot = flight_state(t0, z0, w0, t, params, forcing)
        err = z - zb
        if abs(err) < 1e-15 or abs(zdot) < 1e-8:
            break
        t_new = t - err / zdot
        if not a <= t_new <= b:
            break
        z_new, _ = flight_state(t0, z0, w0, t_new, params, forcing)
        if abs(z_new - zb) >= abs(err):
            break
        t = t_new
    return t


def find_contact(t0: float, z0: float, w0: float, from_side: Side | None, params: SystemParams,
                 forcing: Forcing, t_max: float, h_scan: float = H_SCAN) -> tuple[float, Side]:
    """Earliest barrier contact after a launch at ``(t0, z0, w0)``.

    ``from_side`` names the barrier the launch sits on (or ``None`` for a
    launch strictly inside the gap). Returns ``(t_contact, side)``.
    """
    gaps = [
        _Gap(side, t0, z0, w0, side is from_side, params, forcing)
        for side in (Side.BOTTOM, Side.TOP)
    ]
    start = t0 + T_EPS
    for gap in gaps:
        g0 = gap(start)
        if gap.divided:
            if g0 > 0.0:
                raise Chatter(f"launch at t={t0} cannot leave the {gap.side.name.lower()} barrier")
        elif g0 > POS_TOL:
            raise DomainError(f"launch state at t={t0} lies outside the gap")

    chunk = 64
    a = start
    while a < t_max:
        ts = a + h_scan * np.arange(chunk + 1)
        if ts[-1] > t_max:
            ts = np.append(ts[ts < t_max], t_max)
        z, zdot = flight_arrays(t0, z0, w0, ts, params, forcing)
        vals = [gap.signs(ts, z) for gap in gaps]
        best = None
        for gap, val in zip(gaps, vals):
            hit = _first_bracket(gap, ts, val, zdot, t0, z0, w0, params, forcing)
            if hit is not None and (best is None or hit[0] < best[0]):
                best = (hit[0], hit[1], gap)
        if best is not None:
            lo, hi, gap = best
            if gap(hi) == 0.0:
                t_star = hi
            else:
                t_star = brentq(gap, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
            t_star = _polish(t_star, lo, hi, gap.side, t0, z0, w0, params, forcing)
            return t_star, gap.side
        a = float(ts[-1])
        if ts[-1] >= t_max:
            break
    raise NoImpact(f"no impact in ({t0}, {t_max}]")


def _first_bracket(gap, ts, val, zdot, t0, z0, w0, params, forcing):
    """First ``[lo, hi]`` on the grid where ``gap`` reaches zero, or ``None``.

    Covers sign changes at grid points and interior maxima (tangencies) that a
    coarse grid would step over.
    """
    s = gap.side.sign
    rate = s * zdot  # d(gap)/dt for the undivided gap
    for i in range(len(ts) - 1):
        if val[i + 1] >= 0.0:
            return ts[i], ts[i + 1]
        if rate[i] > 0.0 and rate[i + 1] < 0.0:
            def vel(t, s=s):
                return s * flight_state(t0, z0, w0, t, params, forcing)[1]
            te = brentq(vel, ts[i], ts[i + 1], xtol=1e-15)
            if te - t0 <= T_EPS:
                continue
            if gap(te) >= 0.0:
                return ts[i], te
    return None


def next_impact(prev: ImpactEvent, params: SystemParams, forcing: Forcing,
                t_max: float) -> ImpactEvent:
    """Next impact after ``prev``; raises ``NoImpact`` if none before ``t_max``."""
    if t_max <= prev.t:
        raise DomainError("t_max must exceed the impact time")
    t_star, side = find_contact(prev.t, prev.z(params.d), prev.v_post, prev.side,
                                params, forcing, t_max)
    _, v_pre = flight_eval(prev, t_star, params, forcing)
    return ImpactEvent.make(t_star, side, v_pre, params, forcing)


def map_residual(kind: MapKind | str, t_j: float, v_j: float, t_next: float, v_next: float,
                 params: SystemParams, forcing: Forcing) -> tuple[float, float]:
    """Velocity and position residuals of the basic map ``kind``."""
    kind = MapKind(kind)
    dt = t_next - t_j
    r, gbar = params.r, params.gbar
    res_v = (-r * v_j + gbar * dt + forcing.single_integral(t_j, t_next)) - v_next
    res_z = (-r * v_j * dt + 0.5 * gbar * dt * dt + forcing.double_integral(t_j, t_next)
             - kind.offset * params.d)
    return float(res_v), float(res_z)


def relocate_impact(kind: MapKind | str, t_j: float, v_j: float, t_guess: float,
                    params: SystemParams, forcing: Forcing) -> tuple[float, float]:
    """Solve the position equation of map ``kind`` for the impact time near ``t_guess``.

    Returns ``(t_next, v_next)``; used for finite-difference leg Jacobians.
    """
    kind = MapKind(kind)
    r, gbar = params.r, params.gbar
    t = t_guess
    for _ in range(50):
        _, res_z = map_residual(kind, t_j, v_j, t, 0.0, params, forcing)
        slope = -r * v_j + gbar * (t - t_j) + forcing.single_integral(t_j, t)
        if slope == 0.0:
            break
        step = res_z / slope
        t -= step
        if abs(step) < 1e-15 * max(1.0, abs(t)):
            break
    v_next = -r * v_j + gbar * (t - t_j) + forcing.single_integral(t_j, t)
    return float(t), float(v_next)
