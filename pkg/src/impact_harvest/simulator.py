"""Event-driven simulation, steady-state pattern labels, absolute trajectories."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import Chatter, DomainError, InsufficientWindow, NoImpact
from .flight import (POS_TOL, ImpactEvent, Side, find_contact, flight_arrays, flight_state,
                     next_impact)
from .model import FORCING_PERIOD, Forcing, SystemParams, cosine_forcing

PERIODS_TRANSIENT = 200
PERIODS_WINDOW = 40
K_MAX = 16
MATCH_TOL = 1e-5
CHATTER_DT = 1e-8
# longest admissible flight before declaring that the ball never returns
FLIGHT_HORIZON = 20.0 * FORCING_PERIOD


@dataclass
class ImpactSequence:
    events: list[ImpactEvent]
    params: SystemParams
    forcing: Forcing
    t_start: float
    t_transient: float
    t_window: float
    last: ImpactEvent | None = None

    @property
    def t_begin(self) -> float:
        return self.t_start + self.t_transient

    @property
    def t_end(self) -> float:
        return self.t_begin + self.t_window

    def __len__(self):
        return len(self.events)

    def warm_start(self, d_new: float | None = None) -> tuple[float, float, float]:
        """``(Z, Zdot_pre, t mod 2)`` of the last impact, placed on the barrier for ``d_new``."""
        ev = self.last if self.last is not None else self.events[-1]
        d = self.params.d if d_new is None else d_new
        return ev.side.z(d), ev.v_pre, math.fmod(ev.t, FORCING_PERIOD)


@dataclass(frozen=True)
class PatternLabel:
    n: float
    m: float
    period_multiple: int
    classification: str  # periodic | aperiodic | chatter
    bottom_per_cycle: int = 0
    top_per_cycle: int = 0

    @property
    def name(self) -> str:
        if self.classification != "periodic":
            return self.classification
        return f"{_fmt(self.n)}:{_fmt(self.m)}"

    @property
    def is_periodic(self) -> bool:
        return self.classification == "periodic"

    def __str__(self) -> str:
        if not self.is_periodic:
            return self.classification
        return f"{self.name} x{self.period_multiple}"


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else f"{x:.3g}"


APERIODIC = PatternLabel(0, 0, 0, "aperiodic")
CHATTER = PatternLabel(0, 0, 0, "chatter")


def _initial_event(params: SystemParams, forcing: Forcing, z0: float, v0: float, t0: float):
    d = params.d
    if z0 > d / 2 + POS_TOL or z0 < -d / 2 - POS_TOL:
        raise DomainError(f"initial position {z0} outside [-d/2, d/2]")
    if abs(z0 - d / 2) <= POS_TOL and v0 >= 0.0:
        return ImpactEvent.make(t0, Side.BOTTOM, v0, params, forcing)
    if abs(z0 + d / 2) <= POS_TOL and v0 <= 0.0:
        return ImpactEvent.make(t0, Side.TOP, v0, params, forcing)
    return None


def iterate_impacts(params: SystemParams, init: tuple[float, float, float],
                    forcing: Forcing | None = None, t_stop: float = math.inf,
                    max_impacts: int | None = None) -> Iterable[ImpactEvent]:
    """Yield impacts from ``init = (Z0, Zdot0, t0)`` until ``t_stop``.

    A start on a barrier moving into it is read as a pre-impact state, so the
    first yielded event is that impact.
    """
    fo = (forcing or cosine_forcing()).with_phase(params.phi)
    z0, v0, t0 = (float(c) for c in init)
    ev = _initial_event(params, fo, z0, v0, t0)
    if ev is None:
        t_hit, side = find_contact(t0, z0, v0, None, params, fo, t0 + FLIGHT_HORIZON)
        _, v_pre = flight_state(t0, z0, v0, t_hit, params, fo)
        ev = ImpactEvent.make(t_hit, side, v_pre, params, fo)
    count = 0
    short = 0
    prev_t = None
    while ev.t <= t_stop:
        yield ev
        count += 1
        if max_impacts is not None and count >= max_impacts:
            return
        if prev_t is not None and ev.t - prev_t < CHATTER_DT:
            short += 1
            if short >= 2:
                raise Chatter(f"impacts accumulate near t={ev.t}")
        else:
            short = 0
        prev_t = ev.t
        ev = next_impact(ev, params, fo, ev.t + FLIGHT_HORIZON)


def simulate(params: SystemParams, init: tuple[float, float, float],
             t_transient: float = PERIODS_TRANSIENT * FORCING_PERIOD,
             t_window: float = PERIODS_WINDOW * FORCING_PERIOD,
             forcing: Forcing | None = None) -> ImpactSequence:
    """Run from ``init = (Z0, Zdot0, t0)`` and keep impacts in the observation window."""
    fo = (forcing or cosine_forcing()).with_phase(params.phi)
    t0 = float(init[2])
    t_begin = t0 + t_transient
    t_end = t_begin + t_window
    kept = []
    last = None
    for ev in iterate_impacts(params, init, forcing, t_stop=t_end):
        last = ev
        if ev.t >= t_begin:
            kept.append(ev)
    if not kept:
        raise NoImpact("no impact inside the observation window")
    return ImpactSequence(kept, params, fo, t0, t_transient, t_window, last=last)


def classify_pattern(seq: ImpactSequence, k_max: int = K_MAX, tol: float = MATCH_TOL) -> PatternLabel:
    """Smallest period multiple ``k`` (in forcing periods) leaving the sequence invariant."""
    events = seq.events
    if not events:
        raise DomainError("empty impact sequence")
    if seq.t_window < 2 * k_max * FORCING_PERIOD:
        raise InsufficientWindow(
            f"window {seq.t_window} shorter than two cycles of {k_max} periods")
    times = np.array([e.t for e in events])
    vel = np.array([e.v_pre for e in events])
    phase = np.array([e.phase for e in events])
    sides = [e.side for e in events]
    for k in range(1, k_max + 1):
        shift = k * FORCING_PERIOD
        n = int(np.searchsorted(times, times[0] + shift - 0.5 * tol * FORCING_PERIOD))
        if n == 0 or n >= len(events):
            continue
        idx = np.arange(len(events) - n)
        if idx.size < n:
            continue
        dphase = np.angle(np.exp(1j * (phase[idx + n] - phase[idx]))) / math.pi
        dt_ok = np.all(np.abs(times[idx + n] - times[idx] - shift) < tol) and np.all(
            np.abs(dphase) < tol)
        dv_ok = np.all(np.abs(vel[idx + n] - vel[idx]) < tol)
        sides_ok = all(sides[i] is sides[i + n] for i in idx)
        if dt_ok and dv_ok and sides_ok:
            nb = sum(1 for s in sides[:n] if s is Side.BOTTOM)
            nt = n - nb
            return PatternLabel(nb / k, nt / k, k, "periodic", nb, nt)
    return APERIODIC


def simulate_and_classify(params: SystemParams, init, t_transient=PERIODS_TRANSIENT * FORCING_PERIOD,
                          t_window=PERIODS_WINDOW * FORCING_PERIOD, forcing=None, k_max=K_MAX):
    """``(sequence or None, label)``; chatter is reported as a label, not raised."""
    try:
        seq = simulate(params, init, t_transient, t_window, forcing)
    except Chatter:
        return None, CHATTER
    return seq, classify_pattern(seq, k_max)


def cycle_events(seq: ImpactSequence, label: PatternLabel) -> list[ImpactEvent]:
    """The last complete cycle of a periodic sequence, starting at its largest bottom impact."""
    n = label.bottom_per_cycle + label.top_per_cycle
    cyc = seq.events[-n:]
    bottoms = [i for i, e in enumerate(cyc) if e.side is Side.BOTTOM]
    if not bottoms:
        return cyc
    i0 = max(bottoms, key=lambda i: cyc[i].v_pre)
    return cyc[i0:] + cyc[:i0]


def recurrence_error(seq: ImpactSequence, k: int = 1) -> float:
    """Largest change in ``(t mod shift, Zdot)`` between impacts one ``k``-period apart."""
    times = np.array([e.t for e in seq.events])
    vel = np.array([e.v_pre for e in seq.events])
    shift = k * FORCING_PERIOD
    n = int(np.searchsorted(times, times[0] + shift - 1e-6))
    if n == 0 or n >= len(times):
        return math.inf
    err_t = np.abs(times[n:] - times[:-n] - shift)
    err_v = np.abs(vel[n:] - vel[:-n])
    return float(max(err_t.max(), err_v.max()))


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    t: np.ndarray
    Z: np.ndarray
    Zdot: np.ndarray
    X_top: np.ndarray = field(default=None)
    X_bottom: np.ndarray = field(default=None)
    x_ball: np.ndarray = field(default=None)


def sample_trajectory(events: Sequence[ImpactEvent], params: SystemParams, forcing: Forcing,
                      points_per_unit: int = 200) -> Trajectory:
    """Relative state sampled on every flight between consecutive impacts."""
    d = params.d
    ts, zs, vs = [], [], []
    for a, b in zip(events[:-1], events[1:]):
        n = max(2, int(math.ceil((b.t - a.t) * points_per_unit)) + 1)
        tt = np.linspace(a.t, b.t, n)
        z, zdot = flight_arrays(a.t, a.z(d), a.v_post, tt, params, forcing)
        z[0], z[-1] = a.z(d), b.z(d)
        zdot[0] = a.v_post
        ts.append(tt)
        zs.append(z)
        vs.append(zdot)
    if not ts:
        raise DomainError("need at least two impacts to sample a trajectory")
    return Trajectory(np.concatenate(ts), np.concatenate(zs), np.concatenate(vs))


def reconstruct_absolute(traj: Trajectory, params: SystemParams, forcing: Forcing,
                         t0: float | None = None) -> Trajectory:
    """Add cylinder and ball positions in absolute dimensionless coordinates.

    ``X*(t) = F2(t) + c1 t + c0`` with ``X*(t0) = 0`` and ``X*'(t0) = F1(t0)``,
    which leaves ``c1 = 0``. The bottom wall sits at ``X* - d/2``.
    """
    t0 = float(traj.t[0]) if t0 is None else t0
    X = np.asarray(forcing.F2(traj.t)) - float(forcing.F2(t0))
    traj.X_top = X + params.d / 2
    traj.X_bottom = X - params.d / 2
    traj.x_ball = X - traj.Z
    return traj


def _fmt17(x) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(path, traj: Trajectory) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "Z", "Zdot", "X_top", "X_bottom", "x_ball"])
        for row in zip(traj.t, traj.Z, traj.Zdot, traj.X_top, traj.X_bottom, traj.x_ball):
            w.writerow([_fmt17(v) for v in row])


def write_impacts_csv(path, events: Sequence[ImpactEvent]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "side", "v_pre", "v_post", "phase"])
        for e in events:
            w.writerow([_fmt17(e.t), e.side.value, _fmt17(e.v_pre), _fmt17(e.v_post),
                        _fmt17(e.phase)])


def read_impacts_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [
            {"t": float(r["t"]), "side": r["side"], "v_pre": float(r["v_pre"]),
             "v_post": float(r["v_post"]), "phase": float(r["phase"])}
            for r in csv.DictReader(fh)
        ]
