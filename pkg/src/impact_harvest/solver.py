"""Periodic orbits from the impact maps: 2:1 quadruples and 1:1 triples.

The 2:1 cycle starts at a bottom impact at ``t = 0`` and runs
bottom -> bottom (P1, duration ``2q``), bottom -> top (P2, ``2p``),
top -> bottom (P3, ``2(1-q-p)``). Unknowns are the opening pre-impact velocity
``v``, the forcing phase ``phi`` at the opening impact, and the fractions
``q``, ``p``. The 1:1 cycle is bottom -> top (``dt``) then top -> bottom.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NoConvergence, SpuriousRoot
from .flight import ImpactEvent, Side, flight_arrays, next_impact
from .model import FORCING_PERIOD, Forcing, SystemParams, cosine_forcing, wrap_phase

PI = math.pi
RESIDUAL_TOL = 1e-10
FD_STEP = 1e-7
MAX_ITER = 100
_DEN_SWAP = 1e-10


# ---------------------------------------------------------------------------
# orbit records


@dataclass
class Orbit21:
    d: float
    r: float
    gbar: float
    v_k: float
    phi_k: float
    q: float
    p: float
    v_k1: float = math.nan
    v_k2: float = math.nan
    residual_norm: float = math.nan
    valid: bool = False
    iterations: int = 0
    diagnostics: dict = field(default_factory=dict, repr=False)

    kind = "2:1"

    @property
    def core(self) -> np.ndarray:
        return np.array([self.v_k, self.phi_k, self.q, self.p])

    @property
    def intervals(self) -> tuple[float, float, float]:
        return 2.0 * self.q, 2.0 * self.p, 2.0 * (1.0 - self.q - self.p)

    @property
    def times(self) -> tuple[float, float, float, float]:
        t1, t2, _ = self.intervals
        return 0.0, t1, t1 + t2, FORCING_PERIOD

    @property
    def velocities(self) -> tuple[float, float, float]:
        return self.v_k, self.v_k1, self.v_k2

    @property
    def sides(self) -> tuple[Side, Side, Side]:
        return Side.BOTTOM, Side.BOTTOM, Side.TOP

    @property
    def phases(self) -> tuple[float, float, float]:
        return tuple(wrap_phase(PI * t + self.phi_k) for t in self.times[:3])

    def params(self) -> SystemParams:
        return SystemParams(r=self.r, d=self.d, gbar=self.gbar, phi=self.phi_k)

    def events(self, forcing: Forcing | None = None) -> list[ImpactEvent]:
        """Impacts of one cycle plus the closing impact at ``t = 2``."""
        forcing = _phased(forcing, self.phi_k)
        params = self.params()
        vs = self.velocities + (self.v_k,)
        sides = self.sides + (Side.BOTTOM,)
        return [ImpactEvent.make(t, s, v, params, forcing)
                for t, s, v in zip(self.times, sides, vs)]

    def to_record(self) -> dict:
        return {"type": self.kind, "d": self.d, "r": self.r, "gbar": self.gbar,
                "v_k": self.v_k, "phi_k": self.phi_k, "q": self.q, "p": self.p,
                "v_k1": self.v_k1, "v_k2": self.v_k2, "residual": self.residual_norm,
                "valid": bool(self.valid)}


@dataclass
class Orbit11:
    d: float
    r: float
    gbar: float
    v_k: float
    phi_k: float
    dt_k: float
    v_k1: float = math.nan
    residual_norm: float = math.nan
    valid: bool = False
    iterations: int = 0
    diagnostics: dict = field(default_factory=dict, repr=False)

    kind = "1:1"

    @property
    def core(self) -> np.ndarray:
        return np.array([self.v_k, self.phi_k, self.dt_k])

    @property
    def intervals(self) -> tuple[float, float]:
        return self.dt_k, FORCING_PERIOD - self.dt_k

    @property
    def times(self) -> tuple[float, float, float]:
        return 0.0, self.dt_k, FORCING_PERIOD

    @property
    def velocities(self) -> tuple[float, float]:
        return self.v_k, self.v_k1

    @property
    def sides(self) -> tuple[Side, Side]:
        return Side.BOTTOM, Side.TOP

    @property
    def phases(self) -> tuple[float, float]:
        return tuple(wrap_phase(PI * t + self.phi_k) for t in self.times[:2])

    def params(self) -> SystemParams:
        return SystemParams(r=self.r, d=self.d, gbar=self.gbar, phi=self.phi_k)

    def events(self, forcing: Forcing | None = None) -> list[ImpactEvent]:
        forcing = _phased(forcing, self.phi_k)
        params = self.params()
        vs = self.velocities + (self.v_k,)
        sides = self.sides + (Side.BOTTOM,)
        return [ImpactEvent.make(t, s, v, params, forcing)
                for t, s, v in zip(self.times, sides, vs)]

    def to_record(self) -> dict:
        return {"type": self.kind, "d": self.d, "r": self.r, "gbar": self.gbar,
                "v_k": self.v_k, "phi_k": self.phi_k, "q": self.dt_k / 2.0, "p": None,
                "v_k1": self.v_k1, "v_k2": None, "residual": self.residual_norm,
                "valid": bool(self.valid)}


def _phased(forcing: Forcing | None, phi: float) -> Forcing:
    base = cosine_forcing() if forcing is None else forcing
    return base.with_phase(phi)


def _is_cosine(forcing: Forcing | None) -> bool:
    return forcing is None or forcing.name == "cosine"


# ---------------------------------------------------------------------------
# 2:1 residuals


def _check_fractions(q: float, p: float) -> None:
    if not (q > 0.0 and p > 0.0):
        raise DomainError(f"interval fractions must be positive (q={q}, p={p})")


def residual_2to1(x, params: SystemParams) -> np.ndarray:
    """Cosine-forcing residuals ``v - RHS_i(phi, q, p)`` for the four closed forms.

    Row order: velocity sum, first bottom-bottom position, bottom-top
    position, summed positions.
    """
    v, phi, q, p = (float(c) for c in x)
    _check_fractions(q, p)
    r, g, d = params.r, params.gbar, params.d
    s0, c0 = math.sin(phi), math.cos(phi)
    a1 = 2.0 * PI * q + phi
    a2 = 2.0 * PI * (q + p) + phi
    s1, c1 = math.sin(a1), math.cos(a1)
    s2, c2 = math.sin(a2), math.cos(a2)
    w = 1.0 - p - q

    rhs_sum = (2 * q * (r - 1) * g - 2 * p * g + (1 - r) / PI * s0 + r / PI * s1
               - s2 / PI + 2 * g / (r + 1)) / (1 - r + r * r)
    rhs_p1 = (PI * q * g - s0 - c1 / (2 * PI * q) + c0 / (2 * PI * q)) / (PI * r)
    rhs_p2 = (s1 + 2 * PI * q * r * g + r * s1 - r * s0 + c2 / (2 * PI * p)
              - c1 / (2 * PI * p) - PI * p * g - PI * d / (2 * p)) / (PI * r * r)

    den = 2 * r ** 3 * w - 2 * p * r * r + 2 * q * r
    num = (s0 * (-2 * r * r * w + 2 * p * r - 2 * q) / PI
           - 2 * s2 * w * (1 + r) / PI
           + s1 * (2 * r * r * w - 2 * p * r + 2 * r * w - 2 * p) / PI
           + 4 * r * r * g * q * w - 4 * g * r * p * q - 4 * g * r * p * w
           + g * (2 * q * q + 2 * p * p + 2 * w * w))
    if abs(den) < _DEN_SWAP:
        res_sum_pos = v * den - num
    else:
        res_sum_pos = v - num / den
    return np.array([v - rhs_sum, v - rhs_p1, v - rhs_p2, res_sum_pos])


def residual_2to1_general(x, params: SystemParams, forcing: Forcing) -> np.ndarray:
    """Same four residuals built from generic ``F1``, ``F2`` of ``forcing``.

    ``forcing`` is taken at zero phase and shifted by the candidate ``phi``.
    """
    v, phi, q, p = (float(c) for c in x)
    _check_fractions(q, p)
    fo = forcing.with_phase(phi)
    r, g, d = params.r, params.gbar, params.d
    T1, T2 = 2.0 * q, 2.0 * p
    T3 = FORCING_PERIOD - T1 - T2
    T = FORCING_PERIOD
    t0, t1, t2 = 0.0, T1, T1 + T2
    F1 = [float(fo.F1(t)) for t in (t0, t1, t2)]
    F2 = [float(fo.F2(t)) for t in (t0, t1, t2)]

    rhs_sum = ((r - 1) * g * T1 - g * T2 + (1 - r) * F1[0] + r * F1[1] - F1[2]
               + T * g / (r + 1)) / (1 - r + r * r)
    rhs_p1 = (F2[1] - F2[0]) / (r * T1) + (g * T1 - 2 * F1[0]) / (2 * r)
    rhs_p2 = ((g * T1 + F1[1] - F1[0]) / r - (d + F2[2] - F2[1]) / (r * r * T2)
              - (g * T2 - 2 * F1[1]) / (2 * r * r))
    den = r ** 3 * T3 - r * r * T2 + r * T1
    num = (0.5 * g * (T1 * T1 + T2 * T2 + T3 * T3)
           + F1[0] * (-r * r * T3 + r * T2 - T1)
           + F1[1] * (r * r * T3 - r * T2 + r * T3 - T2)
           + r * r * g * T1 * T3 - r * g * T1 * T2
           - r * g * T2 * T3 - (1 + r) * T3 * F1[2])
    if abs(den) < _DEN_SWAP:
        res_sum_pos = v * den - num
    else:
        res_sum_pos = v - num / den
    return np.array([v - rhs_sum, v - rhs_p1, v - rhs_p2, res_sum_pos])


def recover_velocities(core, params: SystemParams, forcing: Forcing | None = None) -> tuple[float, float]:
    """Pre-impact velocities at the second bottom impact and the top impact."""
    v, phi, q, p = (float(c) for c in core)
    fo = _phased(forcing, phi)
    r, g = params.r, params.gbar
    T1, T2 = 2.0 * q, 2.0 * p
    f0, f1, f2 = (float(fo.F1(t)) for t in (0.0, T1, T1 + T2))
    v_k1 = -r * v + g * T1 + f1 - f0
    v_k2 = r * r * v - r * g * T1 + g * T2 + r * f0 - (1 + r) * f1 + f2
    return v_k1, v_k2


# ---------------------------------------------------------------------------
# 1:1 residuals


def residual_1to1(x, params: SystemParams, forcing: Forcing | None = None) -> np.ndarray:
    """Velocity-sum, bottom->top position and top->bottom position residuals."""
    v, phi, dt = (float(c) for c in x)
    if not 0.0 < dt < FORCING_PERIOD:
        raise DomainError(f"bottom-to-top interval must lie in (0, 2), got {dt}")
    fo = _phased(forcing, phi)
    r, g, d = params.r, params.gbar, params.d
    ta, tb = dt, FORCING_PERIOD - dt
    v1 = -r * v + g * ta + fo.single_integral(0.0, ta)
    res_sum = (1 + r) * (v + v1) - g * FORCING_PERIOD
    res_top = -r * v * ta + 0.5 * g * ta * ta + fo.double_integral(0.0, ta) + d
    res_bottom = -r * v1 * tb + 0.5 * g * tb * tb + fo.double_integral(ta, FORCING_PERIOD) - d
    return np.array([res_sum, res_top, res_bottom])


def top_velocity_1to1(core, params: SystemParams, forcing: Forcing | None = None) -> float:
    v, phi, dt = (float(c) for c in core)
    fo = _phased(forcing, phi)
    return -params.r * v + params.gbar * dt + fo.single_integral(0.0, dt)


# ---------------------------------------------------------------------------
# Newton


def fd_jacobian(fun, x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Central-difference Jacobian."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        cols.append((fun(x + e) - fun(x - e)) / (2.0 * step))
    return np.column_stack(cols)


def damped_newton(fun, x0, tol: float = RESIDUAL_TOL, max_iter: int = MAX_ITER,
                  admissible=None, polish: int = 2):
    """Newton with central-difference Jacobian and Armijo backtracking (factor 0.5).

    Returns ``(x, residual_inf_norm, iterations)``. ``admissible(x)`` rejects
    trial points outside the residual's domain.
    """
    x = np.asarray(x0, dtype=float).copy()

    def safe(y):
        if admissible is not None and not admissible(y):
            return None
        try:
            val = fun(y)
        except DomainError:
            return None
        return val if np.all(np.isfinite(val)) else None

    fx = safe(x)
    if fx is None:
        raise NoConvergence("initial guess outside the residual domain", x=x)
    it = 0
    extra = 0
    while True:
        norm = float(np.max(np.abs(fx)))
        if norm < tol:
            if extra >= polish or norm == 0.0:
                return x, norm, it
            extra += 1
        if it >= max_iter:
            if norm < tol:
                return x, norm, it
            raise NoConvergence(f"no convergence after {max_iter} iterations", x=x, residual=norm)
        it += 1
        try:
            J = fd_jacobian(lambda y: fun(y), x)
            dx = np.linalg.solve(J, -fx)
        except (np.linalg.LinAlgError, DomainError):
            if norm < tol:
                return x, norm, it
            raise NoConvergence("singular Jacobian", x=x, residual=norm)
        merit = 0.5 * float(fx @ fx)
        alpha = 1.0
        accepted = False
        while alpha > 1e-10:
            trial = x + alpha * dx
            ft = safe(trial)
            if ft is not None and 0.5 * float(ft @ ft) <= (1.0 - 2e-4 * alpha) * merit:
                x, fx = trial, ft
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            if norm < tol:
                return x, norm, it
            raise NoConvergence("line search failed", x=x, residual=norm)


# ---------------------------------------------------------------------------
# solvers


def _fractions_ok(x) -> bool:
    return x[2] > 0.0 and x[3] > 0.0 and x[2] < 1.0 and x[3] < 1.0


def solve_2to1(params: SystemParams, guess, forcing: Forcing | None = None,
               tol: float = RESIDUAL_TOL, max_iter: int = MAX_ITER,
               require_valid: bool = False) -> Orbit21:
    """Solve the 2:1 quadruple from ``guess = (v, phi, q, p)``.

    Uses the cosine closed forms when ``forcing`` is cosine (or ``None``),
    otherwise the generic-forcing residuals. Converged roots that are not
    physically admissible come back with ``valid=False`` unless
    ``require_valid`` is set, in which case ``SpuriousRoot`` is raised.
    """
    if _is_cosine(forcing):
        def fun(x):
            return residual_2to1(x, params)
    else:
        def fun(x):
            return residual_2to1_general(x, params, forcing)
    x, norm, it = damped_newton(fun, guess, tol=tol, max_iter=max_iter, admissible=_fractions_ok)
    x[1] = wrap_phase(x[1])
    v_k1, v_k2 = recover_velocities(x, params, forcing)
    orbit = Orbit21(d=params.d, r=params.r, gbar=params.gbar, v_k=float(x[0]), phi_k=float(x[1]),
                    q=float(x[2]), p=float(x[3]), v_k1=v_k1, v_k2=v_k2,
                    residual_norm=norm, iterations=it)
    valid, diag = validate_orbit(orbit, forcing)
    orbit.valid, orbit.diagnostics = valid, diag
    if require_valid and not valid:
        raise SpuriousRoot(f"root at d={params.d} is not admissible: {diag['failed']}", orbit)
    return orbit


def solve_1to1(params: SystemParams, guess, forcing: Forcing | None = None,
               tol: float = RESIDUAL_TOL, max_iter: int = MAX_ITER,
               require_valid: bool = False) -> Orbit11:
    """Solve the 1:1 triple from ``guess = (v, phi, dt)``."""
    def fun(x):
        return residual_1to1(x, params, forcing)

    def ok(x):
        return 0.0 < x[2] < FORCING_PERIOD

    x, norm, it = damped_newton(fun, guess, tol=tol, max_iter=max_iter, admissible=ok)
    x[1] = wrap_phase(x[1])
    orbit = Orbit11(d=params.d, r=params.r, gbar=params.gbar, v_k=float(x[0]),
                    phi_k=float(x[1]), dt_k=float(x[2]),
                    v_k1=top_velocity_1to1(x, params, forcing),
                    residual_norm=norm, iterations=it)
    valid, diag = validate_orbit(orbit, forcing)
    orbit.valid, orbit.diagnostics = valid, diag
    if require_valid and not valid:
        raise SpuriousRoot(f"root at d={params.d} is not admissible: {diag['failed']}", orbit)
    return orbit


def resolve(orbit, params: SystemParams, forcing: Forcing | None = None, **kw):
    """Re-solve at ``params`` warm-started from ``orbit`` (same family)."""
    if isinstance(orbit, Orbit21):
        return solve_2to1(params, orbit.core, forcing, **kw)
    return solve_1to1(params, orbit.core, forcing, **kw)


# ---------------------------------------------------------------------------
# validity


def validate_orbit(orbit, forcing: Forcing | None = None, samples: int = 256,
                   pen_tol: float = 1e-10) -> tuple[bool, dict]:
    """Physical admissibility of a solved orbit.

    Checks positive intervals, pre-impact velocity signs matching the barrier
    sides, containment of every flight in ``[-d/2, d/2]`` (sampled plus
    interior extrema), and that the event finder sees no earlier impact.
    """
    diag: dict = {"failed": []}
    intervals = orbit.intervals
    diag["positive_intervals"] = all(T > 0.0 for T in intervals)
    signs_ok = all(s.sign * v > 0.0 for s, v in zip(orbit.sides, orbit.velocities))
    diag["velocity_signs"] = bool(signs_ok)
    if not diag["positive_intervals"]:
        diag["failed"] = ["positive_intervals"] + ([] if signs_ok else ["velocity_signs"])
        diag["containment"] = False
        diag["no_early_impact"] = False
        diag["max_penetration"] = math.inf
        diag["failed"] += ["containment", "no_early_impact"]
        return False, diag

    params = orbit.params()
    fo = _phased(forcing, orbit.phi_k)
    events = orbit.events(forcing)
    worst = -math.inf
    for start, end in zip(events[:-1], events[1:]):
        pen = _segment_penetration(start, end, params, fo, samples)
        worst = max(worst, pen)
    diag["max_penetration"] = worst
    diag["containment"] = bool(worst <= pen_tol)

    early = True
    for start, end in zip(events[:-1], events[1:]):
        try:
            found = next_impact(start, params, fo, end.t + 0.5)
        except Exception:  # chatter, no impact: the planned cycle is not realised
            early = False
            break
        if found.side is not end.side or abs(found.t - end.t) > 1e-7:
            early = False
            break
    diag["no_early_impact"] = bool(early)
    for key in ("positive_intervals", "velocity_signs", "containment", "no_early_impact"):
        if not diag[key]:
            diag["failed"].append(key)
    return not diag["failed"], diag


def _segment_penetration(start: ImpactEvent, end: ImpactEvent, params: SystemParams,
                         forcing: Forcing, samples: int) -> float:
    """Largest excursion beyond either barrier strictly inside the flight."""
    d = params.d
    z0, w0 = start.z(d), start.v_post
    ts = np.linspace(start.t, end.t, samples)[1:-1]
    if ts.size == 0:
        return -math.inf
    z, zdot = flight_arrays(start.t, z0, w0, ts, params, forcing)
    pen = max(np.max(z - d / 2), np.max(-d / 2 - z))
    # interior extrema between samples
    idx = np.flatnonzero(np.sign(zdot[:-1]) * np.sign(zdot[1:]) < 0)
    for i in idx:
        def vel(t):
            return flight_arrays(start.t, z0, w0, np.array([t]), params, forcing)[1][0]
        te = brentq(vel, ts[i], ts[i + 1], xtol=1e-14)
        ze = flight_arrays(start.t, z0, w0, np.array([te]), params, forcing)[0][0]
        pen = max(pen, ze - d / 2, -d / 2 - ze)
    return float(pen)


def loop_clearance(orbit: Orbit21, forcing: Forcing | None = None) -> float:
    """Largest interior height of the bottom->top flight above ``Z = d/2`` (negative when clear).

    Smooth in ``d``; its zero locates the grazing of the bottom->top loop.
    """
    events = orbit.events(forcing)
    params = orbit.params()
    fo = _phased(forcing, orbit.phi_k)
    start, end = events[1], events[2]
    d = params.d
    z0, w0 = start.z(d), start.v_post
    ts = np.linspace(start.t, end.t, 257)[1:-1]
    z, zdot = flight_arrays(start.t, z0, w0, ts, params, fo)
    best = float(np.max(z - d / 2))
    idx = np.flatnonzero((zdot[:-1] > 0) & (zdot[1:] <= 0))
    for i in idx:
        def vel(t):
            return flight_arrays(start.t, z0, w0, np.array([t]), params, fo)[1][0]
        te = brentq(vel, ts[i], ts[i + 1], xtol=1e-15)
        ze = flight_arrays(start.t, z0, w0, np.array([te]), params, fo)[0][0]
        best = max(best, float(ze - d / 2))
    return best


# ---------------------------------------------------------------------------
# cold starts


SEED_PHI = tuple(k * PI / 4 for k in range(8))
SEED_Q = (0.05, 0.15, 0.25)
SEED_P = (0.3, 0.45, 0.6)
SEED_DT = (0.6, 1.0, 1.4)


def seed_grid_2to1(params: SystemParams, forcing: Forcing | None = None) -> list[np.ndarray]:
    """Cold-start guesses; ``v`` comes from the velocity-sum closed form at each seed."""
    seeds = []
    for phi, q, p in itertools.product(SEED_PHI, SEED_Q, SEED_P):
        res = residual_2to1(np.array([0.0, phi, q, p]), params)
        seeds.append(np.array([-res[0], phi, q, p]))
    return seeds


def seed_grid_1to1(params: SystemParams, forcing: Forcing | None = None) -> list[np.ndarray]:
    """Cold-start guesses; ``v`` from the bottom->top position equation."""
    seeds = []
    for phi, dt in itertools.product(SEED_PHI, SEED_DT):
        fo = _phased(forcing, phi)
        v = (params.d + 0.5 * params.gbar * dt * dt + fo.double_integral(0.0, dt)) / (params.r * dt)
        seeds.append(np.array([v, phi, dt]))
    return seeds


def _dedupe(orbits, key):
    out = []
    for o in orbits:
        if all(np.max(np.abs(key(o) - key(u))) > 1e-6 for u in out):
            out.append(o)
    return out


def _orbit_key(o):
    c = np.delete(o.core, 1)
    return np.concatenate([c, [math.sin(o.phi_k), math.cos(o.phi_k)]])


def find_orbits_2to1(params: SystemParams, forcing: Forcing | None = None) -> list[Orbit21]:
    """All distinct 2:1 roots reached from the seed grid, valid ones first."""
    found = []
    for seed in seed_grid_2to1(params, forcing):
        try:
            found.append(solve_2to1(params, seed, forcing))
        except (NoConvergence, DomainError):
            continue
    found = [o for o in found if 0 < o.q < 1 and 0 < o.p < 1]
    found = _dedupe(found, _orbit_key)
    return sorted(found, key=lambda o: (not o.valid, -o.v_k))


def find_orbits_1to1(params: SystemParams, forcing: Forcing | None = None) -> list[Orbit11]:
    """All distinct 1:1 roots reached from the seed grid, valid ones first."""
    found = []
    for seed in seed_grid_1to1(params, forcing):
        try:
            found.append(solve_1to1(params, seed, forcing))
        except (NoConvergence, DomainError):
            continue
    found = _dedupe(found, _orbit_key)
    return sorted(found, key=lambda o: (not o.valid, -o.v_k))
