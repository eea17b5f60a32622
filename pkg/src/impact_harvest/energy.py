"""Per-impact output voltage and the averaged metrics per impact and per unit time.

The membrane's electromechanics are not modelled: a monotone map from the
pre-impact speed ``|Zdot^-|`` to the output ``U - U_in`` stands in for it.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError
from .flight import ImpactEvent
from .model import FORCING_PERIOD

WINDOW_1TO1 = 30.0
WINDOW_2TO1 = 20.0


class UndefinedAverage(DomainError):
    """No impact inside the averaging window."""


@dataclass(frozen=True)
class VoltageModel:
    """``kind='power'``: ``U = c |v|**gamma``; ``kind='table'``: linear interpolation
    of ``(speeds, outputs)``, extrapolated linearly beyond the last node."""

    kind: str = "power"
    c: float = 1.0
    gamma: float = 2.0
    speeds: tuple[float, ...] = ()
    outputs: tuple[float, ...] = ()
    U_in: float = 0.0

    def __post_init__(self):
        if self.kind == "power":
            if not (self.c > 0.0 and self.gamma > 0.0):
                raise DomainError("power-law voltage needs c > 0 and gamma > 0")
        elif self.kind == "table":
            s = np.asarray(self.speeds, float)
            u = np.asarray(self.outputs, float)
            if s.size < 2 or s.size != u.size:
                raise DomainError("voltage table needs >= 2 matching (speed, output) pairs")
            if s[0] != 0.0 or u[0] != 0.0:
                raise DomainError("voltage table must start at (0, 0)")
            if np.any(np.diff(s) <= 0.0) or np.any(np.diff(u) <= 0.0):
                raise DomainError("voltage table must be strictly increasing")
        else:
            raise DomainError(f"unknown voltage model kind {self.kind!r}")

    @classmethod
    def power_law(cls, c: float = 1.0, gamma: float = 2.0, U_in: float = 0.0) -> "VoltageModel":
        return cls("power", c=c, gamma=gamma, U_in=U_in)

    @classmethod
    def table(cls, speeds: Sequence[float], outputs: Sequence[float],
              U_in: float = 0.0) -> "VoltageModel":
        return cls("table", speeds=tuple(map(float, speeds)), outputs=tuple(map(float, outputs)),
                   U_in=U_in)


def voltage(v_pre, model: VoltageModel = VoltageModel()):
    """Output voltage ``U - U_in`` for pre-impact velocity ``v_pre`` (scalar or array)."""
    a = np.abs(np.asarray(v_pre, dtype=float))
    if model.kind == "power":
        out = model.c * a ** model.gamma
    else:
        s = np.asarray(model.speeds)
        u = np.asarray(model.outputs)
        slope = (u[-1] - u[-2]) / (s[-1] - s[-2])
        out = np.where(a <= s[-1], np.interp(a, s, u), u[-1] + slope * (a - s[-1]))
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class EnergySummary:
    U_list: list[float]
    U_I_avg: float
    U_T_avg: float
    window: tuple[float, float]
    sides: list[str] = field(default_factory=list)

    @property
    def n_impacts(self) -> int:
        return len(self.U_list)


def averages(events: Iterable[ImpactEvent], model: VoltageModel = VoltageModel(),
             window: tuple[float, float] | None = None) -> EnergySummary:
    """``U_I = sum(U) / N`` and ``U_T = sum(U) / (tf - t0)`` over impacts in ``[t0, tf)``.

    ``events`` may be an ``ImpactSequence`` or any iterable of impacts;
    without ``window`` the span from the first impact to the end of the
    sequence window (or the last impact) is used.
    """
    evs = list(getattr(events, "events", events))
    if window is None:
        if not evs:
            raise UndefinedAverage("no impacts")
        tf = getattr(events, "t_end", None) or evs[-1].t
        window = (evs[0].t, tf)
    t0, tf = float(window[0]), float(window[1])
    if not tf > t0:
        raise DomainError("window must have positive length")
    inside = [e for e in evs if t0 <= e.t < tf]
    if not inside:
        raise UndefinedAverage(f"no impacts in [{t0}, {tf})")
    U = [voltage(e.v_pre, model) for e in inside]
    total = float(np.sum(U))
    return EnergySummary(U, total / len(U), total / (tf - t0), (t0, tf),
                         [e.side.value for e in inside])


def orbit_energy(orbit, model: VoltageModel = VoltageModel()) -> EnergySummary:
    """Exact averages over one forcing period of a solved periodic orbit."""
    U = [voltage(v, model) for v in orbit.velocities]
    total = float(np.sum(U))
    return EnergySummary(U, total / len(U), total / FORCING_PERIOD, (0.0, FORCING_PERIOD),
                         [s.value for s in orbit.sides])


def default_window(label) -> float:
    """30 time units for one impact per barrier per period, 20 otherwise."""
    if label is not None and label.bottom_per_cycle + label.top_per_cycle == 2 * label.period_multiple:
        return WINDOW_1TO1
    return WINDOW_2TO1


def branch_energy(points, model: VoltageModel = VoltageModel(), window: float | None = None):
    """Attach an ``EnergySummary`` to every branch point.

    Analytic points use their solved impact velocities; simulated points are
    averaged over ``window`` time units (default by pattern) from the start
    of their observation window.
    """
    for pt in points:
        if pt.source == "analytic" and pt.orbit is not None:
            pt.energy = orbit_energy(pt.orbit, model)
        elif pt.sequence is not None:
            length = window if window is not None else default_window(pt.label)
            t0 = pt.sequence.t_begin
            pt.energy = averages(pt.sequence, model, (t0, t0 + length))
        else:
            raise DomainError(f"branch point at d={pt.d} carries neither orbit nor sequence")
    return points


def write_energy_csv(path, events: Sequence[ImpactEvent], model: VoltageModel = VoltageModel()):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_impact", "side", "v_pre", "U_out"])
        for e in events:
            w.writerow([format(e.t, ".17g"), e.side.value, format(e.v_pre, ".17g"),
                        format(voltage(e.v_pre, model), ".17g")])
