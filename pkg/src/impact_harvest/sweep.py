"""Branch continuation over ``d``, critical points, grazing hysteresis, bistability."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, GrazingSingularity, NoConvergence, NoImpact, NotFound
from .flight import Side
from .model import FORCING_PERIOD, Forcing, PhysicalParams, SystemParams, s_from_d
from .simulator import (CHATTER, ImpactSequence, PatternLabel, cycle_events,
                        simulate_and_classify)
from .solver import (Orbit11, Orbit21, find_orbits_1to1, find_orbits_2to1, loop_clearance,
                     resolve)
from .stability import StabilityReport, compose_DP

BISECT_TOL = 1e-5
GRAZE_TOL = 5e-4
MIN_STEP_FRACTION = 64
# largest admissible jump of the solution per unit step in d before a
# continuation step is treated as having switched branches
_JUMP_PER_STEP = 50.0


@dataclass
class BranchPoint:
    d: float
    orbit: Orbit21 | Orbit11 | None = None
    stability: StabilityReport | None = None
    energy: object = None
    source: str = "analytic"  # analytic | simulated
    label: PatternLabel | None = None
    sequence: ImpactSequence | None = None

    @property
    def valid(self) -> bool:
        return self.orbit is not None and self.orbit.valid

    @property
    def stable(self) -> bool:
        return self.valid and self.stability is not None and self.stability.stable


@dataclass
class Branch:
    kind: str
    points: list[BranchPoint]
    d_range: tuple[float, float]
    end_reason: str | None = None
    end_d: float | None = None

    @property
    def ds(self) -> np.ndarray:
        return np.array([p.d for p in self.points])

    def sorted(self) -> "Branch":
        self.points.sort(key=lambda p: p.d)
        return self


@dataclass(frozen=True)
class CriticalPoint:
    kind: str
    d: float
    bracket: tuple[float, float] = (math.nan, math.nan)


@dataclass
class SweepReport:
    points: list[BranchPoint]
    critical: list[CriticalPoint] = field(default_factory=list)
    windows: list[tuple[float, float, tuple[str, ...]]] = field(default_factory=list)
    end_reasons: list[tuple[str, float, str]] = field(default_factory=list)


# ---------------------------------------------------------------------------
# continuation


def _analytic_point(orbit, forcing) -> BranchPoint:
    try:
        rep = compose_DP(orbit, forcing)
    except GrazingSingularity:
        rep = None
    return BranchPoint(d=orbit.d, orbit=orbit, stability=rep)


def cold_start(kind: str, params: SystemParams, forcing: Forcing | None = None):
    """Seed-grid root ranked stable-and-valid first, then valid, then any."""
    finder = find_orbits_2to1 if kind == "2:1" else find_orbits_1to1
    orbits = finder(params, forcing)
    if not orbits:
        raise NoConvergence(f"no {kind} root from the seed grid at d={params.d}")

    def rank(o):
        pt = _analytic_point(o, forcing)
        return (not pt.stable, not pt.valid)

    return min(orbits, key=rank)


def continue_branch(kind: str, d_range: tuple[float, float], d_step: float,
                    params: SystemParams, seed=None, forcing: Forcing | None = None) -> Branch:
    """Warm-started continuation from ``d_range[0]`` towards ``d_range[1]``.

    ``seed`` is an orbit (or core vector) solving at ``d_range[0]``; without
    one the seed grid is used. On failure the step halves down to
    ``d_step / 64`` before the branch is declared ended.
    """
    d0, d1 = float(d_range[0]), float(d_range[1])
    if d_step <= 0.0 or d0 == d1:
        raise DomainError("empty sweep range or non-positive step")
    direction = 1.0 if d1 > d0 else -1.0
    p0 = params.with_d(d0)
    if seed is None:
        orbit = cold_start(kind, p0, forcing)
    elif isinstance(seed, (Orbit21, Orbit11)):
        orbit = resolve(seed, p0, forcing)
    else:
        from .solver import solve_1to1, solve_2to1
        orbit = (solve_2to1 if kind == "2:1" else solve_1to1)(p0, np.asarray(seed, float), forcing)
    points = [_analytic_point(orbit, forcing)]
    branch = Branch(kind, points, (d0, d1))
    d = d0
    h = d_step
    h_min = d_step / MIN_STEP_FRACTION
    while direction * (d1 - d) > 1e-12:
        d_new = d + direction * min(h, abs(d1 - d))
        try:
            new = resolve(orbit, params.with_d(d_new), forcing)
            jump = float(np.max(np.abs(_unwrap_core(new) - _unwrap_core(orbit))))
            if jump > _JUMP_PER_STEP * abs(d_new - d) + 1e-3:
                raise NoConvergence(f"continuation jumped by {jump:.3g} at d={d_new}")
        except (NoConvergence, DomainError):
            if h / 2.0 < h_min * (1 - 1e-12):
                branch.end_reason = "NoConvergence"
                branch.end_d = d
                break
            h /= 2.0
            continue
        point = _analytic_point(new, forcing)
        if point.stability is None:
            branch.end_reason = "GrazingSingularity"
            branch.end_d = d_new
            break
        points.append(point)
        orbit, d = new, d_new
        h = min(d_step, 2.0 * h)
    return branch.sorted()


def _unwrap_core(orbit) -> np.ndarray:
    c = orbit.core.copy()
    c[1] = math.atan2(math.sin(c[1]), math.cos(c[1]))
    return c


def branch_both_ways(kind: str, d_seed: float, d_lo: float, d_hi: float, d_step: float,
                     params: SystemParams, seed=None, forcing=None) -> Branch:
    """Continue from ``d_seed`` down to ``d_lo`` and up to ``d_hi``; merged and sorted."""
    down = continue_branch(kind, (d_seed, d_lo), d_step, params, seed, forcing)
    start = next(p.orbit for p in down.points if abs(p.d - d_seed) < 1e-14)
    up = continue_branch(kind, (d_seed, d_hi), d_step, params, start, forcing)
    pts = down.points + [p for p in up.points if abs(p.d - d_seed) > 1e-14]
    br = Branch(kind, pts, (d_lo, d_hi)).sorted()
    br.end_reason = ";".join(f"{tag}:{b.end_reason}@{b.end_d:.6g}" for tag, b in
                             (("low", down), ("high", up)) if b.end_reason)
    br.end_reason = br.end_reason or None
    return br


# ---------------------------------------------------------------------------
# critical points


def _p_minus_one(pt: BranchPoint) -> float:
    """``(1 + l1)(1 + l2)``: changes sign when one real eigenvalue passes -1."""
    return pt.stability.char_at_minus_one


def _delta(pt: BranchPoint) -> float:
    return pt.stability.delta


def _clearance(pt: BranchPoint) -> float:
    return -loop_clearance(pt.orbit)


def _stable_valid(pt: BranchPoint) -> float:
    return 1.0 if pt.stable else -1.0


PREDICATES: dict[str, tuple[Callable[[BranchPoint], float], str]] = {
    "lambda_crosses_minus_one": (_p_minus_one, "B"),
    "delta_crosses_zero": (_delta, "A"),
    "loop_grazing": (_clearance, "G"),
    "stable_valid": (_stable_valid, "S"),
}


def _solve_at(orbit, d, params, forcing) -> BranchPoint | None:
    try:
        new = resolve(orbit, params.with_d(d), forcing)
    except (NoConvergence, DomainError):
        return None
    pt = _analytic_point(new, forcing)
    return pt if pt.stability is not None else None


def bisect_on(a: BranchPoint, b: BranchPoint, fn, params: SystemParams, forcing=None,
              tol: float = BISECT_TOL) -> tuple[float, float]:
    """Bisection in ``d`` on the sign of ``fn`` with fresh analytic solves inside the bracket."""
    fa = fn(a)
    while abs(b.d - a.d) >= tol:
        mid = _solve_at(a.orbit, 0.5 * (a.d + b.d), params, forcing)
        if mid is None:
            mid = _solve_at(b.orbit, 0.5 * (a.d + b.d), params, forcing)
        if mid is None:
            break
        if (fn(mid) > 0) == (fa > 0):
            a, fa = mid, fn(mid)
        else:
            b = mid
    return (a.d, b.d) if a.d <= b.d else (b.d, a.d)


def locate_critical(branch: Branch, predicate: str, params: SystemParams,
                    forcing: Forcing | None = None, tol: float = BISECT_TOL) -> list[CriticalPoint]:
    """Tag sign changes of ``predicate`` between adjacent analytic points."""
    fn, tag = PREDICATES[predicate]
    pts = [p for p in branch.points if p.stability is not None and p.orbit is not None]
    out = []
    for a, b in zip(pts[:-1], pts[1:]):
        fa, fb = fn(a), fn(b)
        if (fa > 0) == (fb > 0):
            continue
        lo, hi = bisect_on(a, b, fn, params, forcing, tol)
        out.append(CriticalPoint(tag, 0.5 * (lo + hi), (lo, hi)))
    out.sort(key=lambda c: c.d)
    if tag == "A":
        out = [CriticalPoint(f"A{i + 1}", c.d, c.bracket) for i, c in enumerate(out)]
    return out


def stable_windows(branch: Branch, params: SystemParams, forcing: Forcing | None = None,
                   tol: float = BISECT_TOL) -> list[tuple[float, float]]:
    """Maximal ``d`` intervals of stable and valid points, ends refined by bisection.

    A window touching the first or last branch point keeps that point's ``d``.
    """
    pts = [p for p in branch.points if p.orbit is not None]
    flags = [p.stable for p in pts]
    windows = []
    i = 0
    while i < len(pts):
        if not flags[i]:
            i += 1
            continue
        j = i
        while j + 1 < len(pts) and flags[j + 1]:
            j += 1
        lo = pts[i].d
        if i > 0:
            lo = 0.5 * sum(bisect_on(pts[i], pts[i - 1], _stable_valid, params, forcing, tol))
        hi = pts[j].d
        if j + 1 < len(pts):
            hi = 0.5 * sum(bisect_on(pts[j], pts[j + 1], _stable_valid, params, forcing, tol))
        windows.append((lo, hi))
        i = j + 1
    return windows


def analyse_branch(branch: Branch, params: SystemParams, forcing=None) -> SweepReport:
    crit = []
    for name in ("lambda_crosses_minus_one", "delta_crosses_zero"):
        crit += locate_critical(branch, name, params, forcing)
    crit.sort(key=lambda c: c.d)
    ends = [(branch.kind, branch.end_d, branch.end_reason)] if branch.end_reason else []
    return SweepReport(points=list(branch.points), critical=crit, end_reasons=ends)


# ---------------------------------------------------------------------------
# hysteresis simulations


@dataclass
class LineageStep:
    d: float
    label: PatternLabel
    sequence: ImpactSequence | None
    min_bottom_v: float


@dataclass
class GrazingResult:
    d: float
    bracket: tuple[float, float]
    direction: str
    label_before: PatternLabel
    label_after: PatternLabel
    min_bottom_v_before: float
    min_bottom_v_after: float
    lineage: list[LineageStep]


def _min_bottom_v(seq: ImpactSequence | None) -> float:
    if seq is None:
        return math.nan
    vs = [abs(e.v_pre) for e in seq.events if e.side is Side.BOTTOM]
    return min(vs) if vs else math.nan


def _step_lineage(params, d, init, forcing, t_transient, t_window):
    p = params.with_d(d)
    try:
        seq, label = simulate_and_classify(p, init, t_transient, t_window, forcing)
    except NoImpact:
        seq, label = None, CHATTER
    return LineageStep(d, label, seq, _min_bottom_v(seq))


def _carry(step: LineageStep, d_new: float, fallback):
    if step.sequence is None:
        return fallback(d_new)
    return step.sequence.warm_start(d_new)


def default_init(d: float) -> tuple[float, float, float]:
    """Cold start used at the edge of every hysteresis lineage."""
    return (0.0, 0.0, 0.0)


def hysteresis_sweep(params: SystemParams, d_values: Sequence[float], init=None,
                     forcing: Forcing | None = None,
                     t_transient: float = 200 * FORCING_PERIOD,
                     t_window: float = 40 * FORCING_PERIOD) -> list[LineageStep]:
    """Simulate along ``d_values`` carrying the final impact state from each ``d`` to the next."""
    steps = []
    state = init if init is not None else default_init(d_values[0])
    for d in d_values:
        if steps:
            state = _carry(steps[-1], d, default_init)
        steps.append(_step_lineage(params, d, state, forcing, t_transient, t_window))
    return steps


def grazing_scan(params: SystemParams, d_range: tuple[float, float], direction: str,
                 d_step: float = 1e-3, init=None, forcing: Forcing | None = None,
                 tol: float = GRAZE_TOL, t_transient: float = 200 * FORCING_PERIOD,
                 t_window: float = 40 * FORCING_PERIOD) -> GrazingResult:
    """Locate the first pattern change of a warm-started lineage.

    ``direction='down'`` starts at ``max(d_range)`` and decreases ``d``;
    ``'up'`` starts at ``min(d_range)``. The change is bisected to ``tol``
    by re-simulating from the last state before the change.
    """
    lo, hi = sorted(float(x) for x in d_range)
    if direction not in ("down", "up"):
        raise DomainError("direction must be 'down' or 'up'")
    if hi - lo <= 0.0 or d_step <= 0.0:
        raise DomainError("empty sweep range")
    n = int(math.floor((hi - lo) / d_step + 1e-9))
    grid = lo + d_step * np.arange(n + 1)
    if grid[-1] < hi - 1e-12:
        grid = np.append(grid, hi)
    if direction == "down":
        grid = grid[::-1]
    lineage = []
    state = init if init is not None else default_init(grid[0])
    for d in grid:
        if lineage:
            state = _carry(lineage[-1], float(d), default_init)
        step = _step_lineage(params, float(d), state, forcing, t_transient, t_window)
        lineage.append(step)
        if len(lineage) > 1 and step.label.name != lineage[0].label.name:
            break
    else:
        raise NotFound(f"no pattern change in [{lo}, {hi}] sweeping {direction}")
    before, after = lineage[-2], lineage[-1]
    ref = lineage[0].label.name
    while abs(after.d - before.d) >= tol:
        mid = 0.5 * (before.d + after.d)
        step = _step_lineage(params, mid, _carry(before, mid, default_init), forcing,
                             t_transient, t_window)
        if step.label.name == ref:
            before = step
        else:
            after = step
    return GrazingResult(d=0.5 * (before.d + after.d), bracket=tuple(sorted((before.d, after.d))),
                         direction=direction, label_before=before.label,
                         label_after=after.label, min_bottom_v_before=before.min_bottom_v,
                         min_bottom_v_after=after.min_bottom_v, lineage=lineage)


@dataclass
class Attractor:
    lineage: str
    label: PatternLabel
    impacts: list[tuple[str, float, float, float]]  # (side, v_pre, phase, dt to next)

    def best_match(self, v: float, phi: float) -> tuple[float, float]:
        """Smallest ``(|v| error, phase error)`` over the cycle's impacts, by velocity error."""
        best = (math.inf, math.inf)
        for _, vv, ph, _ in self.impacts:
            dv = abs(abs(vv) - abs(v))
            dphi = abs(math.atan2(math.sin(ph - phi), math.cos(ph - phi)))
            if (dv, dphi) < best:
                best = (dv, dphi)
        return best


def attractor_from(seq: ImpactSequence, label: PatternLabel, lineage: str) -> Attractor:
    if not label.is_periodic:
        return Attractor(lineage, label, [])
    cyc = cycle_events(seq, label)
    period = label.period_multiple * FORCING_PERIOD
    rows = []
    for i, e in enumerate(cyc):
        dt = (cyc[(i + 1) % len(cyc)].t - e.t) % period
        rows.append((e.side.value, e.v_pre, e.phase, dt if dt > 0.0 else period))
    return Attractor(lineage, label, rows)


def bistability_report(params: SystemParams, d_values: Sequence[float],
                       d_above: float, d_below: float, d_step: float = 1e-3,
                       forcing: Forcing | None = None) -> list[tuple[float, list[Attractor]]]:
    """Attractors reached at each ``d`` by a downward lineage from ``d_above`` and an
    upward lineage from ``d_below``; identical attractors are merged."""
    out = []
    for d in d_values:
        found = []
        for name, start in (("down", d_above), ("up", d_below)):
            n = max(1, int(round(abs(d - start) / d_step)))
            path = np.linspace(start, d, n + 1)
            steps = hysteresis_sweep(params, [float(x) for x in path], forcing=forcing)
            last = steps[-1]
            if last.sequence is None:
                found.append(Attractor(name, last.label, []))
                continue
            att = attractor_from(last.sequence, last.label, name)
            if not any(_same(att, a) for a in found):
                found.append(att)
        out.append((float(d), found))
    return out


def _same(a: Attractor, b: Attractor, tol: float = 1e-5) -> bool:
    if a.label.name != b.label.name or len(a.impacts) != len(b.impacts):
        return False
    va = sorted(x[1] for x in a.impacts)
    vb = sorted(x[1] for x in b.impacts)
    return all(abs(x - y) < tol for x, y in zip(va, vb))


# ---------------------------------------------------------------------------
# output

SWEEP_COLUMNS = ["d", "s_equiv", "orbit_type", "v_k", "phi_k", "dt_k", "dt_k1", "v_k1", "v_k2",
                 "trace", "det", "delta", "lambda1_re", "lambda1_im", "lambda2_re",
                 "lambda2_im", "class", "valid", "U_k_list", "U_I_avg", "U_T_avg"]


def _g(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def point_row(pt: BranchPoint, physical: PhysicalParams | None = None) -> dict:
    o = pt.orbit
    row = dict.fromkeys(SWEEP_COLUMNS, "")
    row["d"] = _g(pt.d)
    if physical is not None:
        row["s_equiv"] = _g(s_from_d(pt.d, physical.M, physical.omega, physical.F_norm))
    if o is not None:
        row["orbit_type"] = o.kind
        row["v_k"], row["phi_k"] = _g(o.v_k), _g(o.phi_k)
        ivs = o.intervals
        row["dt_k"], row["dt_k1"] = _g(ivs[0]), _g(ivs[1])
        row["v_k1"] = _g(o.v_k1)
        row["v_k2"] = _g(getattr(o, "v_k2", None))
        row["valid"] = _g(bool(o.valid))
    rep = pt.stability
    if rep is not None:
        row["trace"], row["det"], row["delta"] = _g(rep.trace), _g(rep.det), _g(rep.delta)
        l1, l2 = rep.eigenvalues
        row["lambda1_re"], row["lambda1_im"] = _g(l1.real), _g(l1.imag)
        row["lambda2_re"], row["lambda2_im"] = _g(l2.real), _g(l2.imag)
        row["class"] = rep.cls.value
    e = pt.energy
    if e is not None:
        row["U_k_list"] = ";".join(_g(u) for u in e.U_list)
        row["U_I_avg"], row["U_T_avg"] = _g(e.U_I_avg), _g(e.U_T_avg)
    return row


def write_sweep_csv(path, points: Sequence[BranchPoint], physical: PhysicalParams | None = None):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        w.writeheader()
        for pt in points:
            w.writerow(point_row(pt, physical))


def write_critical_csv(path, critical: Sequence[CriticalPoint]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "d"])
        for c in critical:
            w.writerow([c.kind, _g(c.d)])
