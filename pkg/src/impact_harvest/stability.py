"""Linear stability of periodic orbits through composed leg Jacobians.

Each leg maps the impact state ``(t_l, Zdot_l)`` on one barrier to the next
impact state; the perturbation keeps the impacts on their barriers. The
return-map Jacobian of a 2:1 cycle is ``DP3 @ DP2 @ DP1``.
"""
from __future__ import annotations

import cmath
import enum
from dataclasses import dataclass

import numpy as np

from .errors import GrazingSingularity
from .flight import ImpactEvent, MapKind, next_impact
from .model import Forcing, SystemParams
from .solver import Orbit21, _phased

DENOM_TOL = 1e-12
MODULUS_BAND = 1e-8
DELTA_BAND = 1e-12


class StabilityClass(str, enum.Enum):
    STABLE_NODE = "StableNode"
    STABLE_FOCUS = "StableFocus"
    UNSTABLE_NODE = "UnstableNode"
    UNSTABLE_FOCUS = "UnstableFocus"
    MARGINAL = "Marginal"

    @property
    def stable(self) -> bool:
        return self in (StabilityClass.STABLE_NODE, StabilityClass.STABLE_FOCUS)


@dataclass(frozen=True)
class StabilityReport:
    DP: np.ndarray
    trace: float
    det: float
    delta: float
    eigenvalues: tuple[complex, complex]
    cls: StabilityClass
    legs: tuple[np.ndarray, ...] = ()

    @property
    def moduli(self) -> tuple[float, float]:
        return abs(self.eigenvalues[0]), abs(self.eigenvalues[1])

    @property
    def lambda_min(self) -> float:
        """Smallest real eigenvalue, or the common real part of a complex pair."""
        return min(self.eigenvalues[0].real, self.eigenvalues[1].real)

    @property
    def char_at_minus_one(self) -> float:
        """``p(-1) = 1 + Tr + Det``; vanishes when an eigenvalue equals -1."""
        return 1.0 + self.trace + self.det

    @property
    def stable(self) -> bool:
        return self.cls.stable

    def to_record(self) -> dict:
        return {
            "trace": self.trace,
            "det": self.det,
            "delta": self.delta,
            "lambda_re": [self.eigenvalues[0].real, self.eigenvalues[1].real],
            "lambda_im": [self.eigenvalues[0].imag, self.eigenvalues[1].imag],
            "class": self.cls.value,
        }


def jacobian_single(kind: MapKind | str, t_l: float, v_l: float, t_next: float,
                    params: SystemParams, forcing: Forcing) -> np.ndarray:
    """2x2 Jacobian of one leg with respect to ``(t_l, Zdot_l)``.

    The shared denominator ``r v_l - gbar T - F1(t_next) + F1(t_l)`` is minus
    the pre-impact velocity at ``t_next``; it vanishes at grazing.
    """
    MapKind(kind)
    r, g = params.r, params.gbar
    T = t_next - t_l
    f_l, f_n = float(forcing.f(t_l)), float(forcing.f(t_next))
    den = r * v_l - g * T - float(forcing.F1(t_next)) + float(forcing.F1(t_l))
    if abs(den) < DENOM_TOL:
        raise GrazingSingularity(f"leg {kind} ends with zero impact velocity (t={t_next})")
    dt_dt = (r * v_l - g * T - f_l * T) / den
    dt_dv = -r * T / den
    dv_dt = dt_dt * (f_n + g) - (f_l + g)
    dv_dv = -r + dt_dv * (f_n + g)
    return np.array([[dt_dt, dt_dv], [dv_dt, dv_dv]])


def fd_leg_jacobian(kind: MapKind | str, t_l: float, v_l: float, t_next: float,
                    params: SystemParams, forcing: Forcing, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of the simulated leg map.

    Each perturbed impact ``(t_l, v_l)`` is launched through the event locator
    and the next impact is found afresh; ``t_next`` only checks that the same
    leg was followed.
    """
    kind = MapKind(kind)
    side_from, side_to = kind.sides
    horizon = t_next + 1.0

    def leg(t, v):
        ev = ImpactEvent.make(t, side_from, v, params, forcing)
        nxt = next_impact(ev, params, forcing, horizon)
        if nxt.side is not side_to or abs(nxt.t - t_next) > 1e-3:
            raise GrazingSingularity(f"perturbed leg {kind.value} changed its next impact")
        return np.array([nxt.t, nxt.v_pre])

    cols = []
    for dt, dv in ((h, 0.0), (0.0, h)):
        cols.append((leg(t_l + dt, v_l + dv) - leg(t_l - dt, v_l - dv)) / (2.0 * h))
    return np.column_stack(cols)


def matrix_rel_err(A: np.ndarray, B: np.ndarray) -> float:
    """``max|A - B| / max|B|``: entrywise error scaled by the largest entry."""
    return float(np.max(np.abs(A - B)) / max(np.max(np.abs(B)), 1e-300))


def eigen_from_trace_det(trace: float, det: float) -> tuple[float, tuple[complex, complex]]:
    """Discriminant and eigenvalues ``(Tr +- sqrt(Delta)) / 2``."""
    delta = trace * trace - 4.0 * det
    root = cmath.sqrt(delta)
    l1 = (trace + root) / 2.0
    l2 = (trace - root) / 2.0
    if delta >= 0.0:
        l1, l2 = complex(l1.real, 0.0), complex(l2.real, 0.0)
    return delta, (l1, l2)


def classify(eigenvalues, delta: float) -> StabilityClass:
    """Node/focus by the sign of ``delta``; stable when both moduli are below one."""
    mods = [abs(l) for l in eigenvalues]
    if abs(delta) < DELTA_BAND or any(abs(m - 1.0) < MODULUS_BAND for m in mods):
        return StabilityClass.MARGINAL
    inside = all(m < 1.0 for m in mods)
    if delta > 0.0:
        return StabilityClass.STABLE_NODE if inside else StabilityClass.UNSTABLE_NODE
    return StabilityClass.STABLE_FOCUS if inside else StabilityClass.UNSTABLE_FOCUS


def report_from_matrix(DP: np.ndarray, legs=()) -> StabilityReport:
    trace = float(DP[0, 0] + DP[1, 1])
    det = float(DP[0, 0] * DP[1, 1] - DP[0, 1] * DP[1, 0])
    delta, eig = eigen_from_trace_det(trace, det)
    return StabilityReport(DP=DP, trace=trace, det=det, delta=delta, eigenvalues=eig,
                           cls=classify(eig, delta), legs=tuple(legs))


def leg_jacobians(orbit, forcing: Forcing | None = None) -> list[np.ndarray]:
    """Leg Jacobians of one cycle in impact order."""
    fo = _phased(forcing, orbit.phi_k)
    params = orbit.params()
    times = orbit.times
    vels = orbit.velocities
    sides = orbit.sides + (orbit.sides[0],)
    legs = []
    for i in range(len(vels)):
        kind = MapKind.between(sides[i], sides[i + 1])
        legs.append(jacobian_single(kind, times[i], vels[i], times[i + 1], params, fo))
    return legs


def compose_DP(orbit, forcing: Forcing | None = None) -> StabilityReport:
    """Return-map Jacobian of a solved orbit (2:1: ``DP3 DP2 DP1``; 1:1: ``DP3 DP2``)."""
    legs = leg_jacobians(orbit, forcing)
    DP = np.eye(2)
    for J in legs:
        DP = J @ DP
    return report_from_matrix(DP, legs)


def trace_closed_form(orbit: Orbit21, forcing: Forcing | None = None) -> float:
    """Closed-form expression for the period-2 trace, transcribed as published.

    On an exact 2:1 orbit this expression reduces to ``r**6``, which is the
    determinant of the composed Jacobian rather than its trace; see
    ``closed_form_check``.
    """
    fo = _phased(forcing, orbit.phi_k)
    r, g = orbit.r, orbit.gbar
    T1, T2, T3 = orbit.intervals
    F = [float(fo.F1(t)) for t in orbit.times]
    sigma1 = r ** 3 * orbit.v_k - g * T3 + r * g * T2 - r * r * g * T1
    den = (F[2] - F[3] - r * F[1] + r * F[2] + r * r * F[0] - r * r * F[1] + sigma1)
    return -r ** 6 * orbit.v_k / den


def closed_form_check(orbit: Orbit21, forcing: Forcing | None = None) -> dict:
    """Compare the published closed form against the numerical trace and determinant."""
    rep = compose_DP(orbit, forcing)
    cf = trace_closed_form(orbit, forcing)

    def rel(a, b):
        return abs(a - b) / max(abs(b), 1e-300)

    return {
        "closed_form": cf,
        "trace": rep.trace,
        "det": rep.det,
        "rel_err_vs_trace": rel(cf, rep.trace),
        "rel_err_vs_det": rel(cf, rep.det),
        "r6": orbit.r ** 6,
    }


def nearest_regime(report: StabilityReport) -> str:
    """Label of the closest row of the node/focus stability table."""
    cls = report.cls
    if cls is StabilityClass.MARGINAL:
        if abs(report.delta) < DELTA_BAND:
            return "node/focus boundary"
        if any(abs(l.imag) == 0.0 and abs(l.real + 1.0) < MODULUS_BAND for l in report.eigenvalues):
            return "period-doubling boundary"
        return "unit-modulus boundary"
    return {
        StabilityClass.UNSTABLE_NODE: "unstable node (Delta>0, |lambda|>1)",
        StabilityClass.STABLE_NODE: "stable node (Delta>0, |lambda|<1)",
        StabilityClass.STABLE_FOCUS: "stable focus (Delta<0, |lambda|<1)",
        StabilityClass.UNSTABLE_FOCUS: "unstable focus (Delta<0, |lambda|>1)",
    }[cls]
