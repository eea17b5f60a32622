"""Named reproduction scenarios with their published parameter values pinned.

Each ``compute_*`` function is pure (returns data); ``write_*`` functions put
the results on disk as CSV (and optionally SVG rendered from that CSV).
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .energy import VoltageModel, branch_energy
from .model import FORCING_PERIOD, PhysicalParams, SystemParams, gbar_from, s_from_d
from .simulator import (reconstruct_absolute, sample_trajectory, simulate_and_classify,
                        write_impacts_csv, write_trajectory_csv)
from .stability import compose_DP
from .solver import find_orbits_1to1, find_orbits_2to1
from . import svgplot
from .sweep import (BranchPoint, GrazingResult, bistability_report,
                    branch_both_ways, grazing_scan, hysteresis_sweep, locate_critical,
                    stable_windows, write_critical_csv, write_sweep_csv)

M = 0.1245
OMEGA = 5.0 * math.pi
F_NORM = 5.0
R = 0.5
BETAS = {"90": math.pi / 2, "60": math.pi / 3, "45": math.pi / 4, "30": math.pi / 6}


def d_from_s(s: float, F_norm: float = F_NORM, omega: float = OMEGA) -> float:
    return s * M * omega ** 2 / (F_norm * math.pi ** 2)


@dataclass(frozen=True)
class CaptionCase:
    panel: str
    beta: float
    d: float
    v0: float
    phi: float
    expected: str  # pattern name, e.g. "1:1", "2:1", "3:1"
    doubled: bool = False  # period multiple > 1 expected
    F_norm: float = F_NORM

    @property
    def gbar(self) -> float:
        return gbar_from(M, self.beta, self.F_norm)

    def params(self) -> SystemParams:
        return SystemParams(r=R, d=self.d, gbar=self.gbar, phi=self.phi)

    @property
    def init(self) -> tuple[float, float, float]:
        return (self.d / 2, self.v0, 0.0)


FIG2_CASES = (
    CaptionCase("a", math.pi / 2, 0.197, 0.5474, 6.211, "1:1", False, 61.0),
    CaptionCase("b", math.pi / 2, 0.193, 0.561, 6.229, "1:1", True, 61.0),
    CaptionCase("c", math.pi / 2, 0.189, 0.465, 6.177, "2:1", False, 61.0),
    CaptionCase("d", math.pi / 6, 0.252, 0.669, 0.128, "1:1", False),
    CaptionCase("e", math.pi / 6, 0.222, 0.676, 0.242, "1:1", True),
    CaptionCase("f", math.pi / 6, 0.213, 0.674, 0.321, "1:1", True),
    CaptionCase("g", math.pi / 6, 0.204, 0.532, 6.106, "2:1", False),
)
# The incline of the time-series figure is not printed; pi/3 reproduces all
# three captioned impact states (see the decisions ledger).
FIG3_CASES = (
    CaptionCase("a", math.pi / 3, 0.38, 0.8673, 0.4217, "1:1"),
    CaptionCase("b", math.pi / 3, 0.184, 0.2164, 1.21, "2:1"),
    CaptionCase("c", math.pi / 3, 0.137, 0.2059, 0.6503, "3:1"),
)
FIG6_CASES = (
    CaptionCase("d", math.pi / 6, 0.1378, 0.416, 5.842, "2:1"),
    CaptionCase("e", math.pi / 6, 0.14, 0.4185, 5.855, "2:1"),
    CaptionCase("f", math.pi / 6, 0.14, 0.3967, 5.88, "3:1"),
    CaptionCase("g", math.pi / 6, 0.1419, 0.4069, 5.864, "2:1"),
)
# published cylinder-length windows of the branch figures, as s ranges
FIG4_S_RANGE = {"90": (0.27, 0.37), "60": (0.25, 0.37), "45": (0.22, 0.33), "30": (0.22, 0.33)}
STABLE_WINDOWS = {"90": (0.167, 0.22), "60": (0.158, 0.22), "45": (0.147, 0.214),
                  "30": (0.1378, 0.205)}
FIG1_CAPTION_21 = (math.pi / 6, 0.16, 0.1924, 1.015)  # (beta, d, |Zdot|, phase)

# slow transients near period doubling (multipliers close to -1) need longer runs
FIG2_TRANSIENT = 1000 * FORCING_PERIOD
BRANCH_RANGE = (0.10, 0.25)
BRANCH_SEED_D = 0.18
BRANCH_STEP = 0.002
GRAZE_RANGE = (0.130, 0.150)
FIG7_S_RANGE = (0.19, 0.72)
FIG7_STEP = 0.005
FIG7_FIXED_S = 0.85
FIG7_F_RANGE = (6.0, 22.0)


# ---------------------------------------------------------------------------
# fig2 / fig3: caption simulations


@dataclass
class CaseResult:
    case: CaptionCase
    label: object
    sequence: object

    @property
    def matches(self) -> bool:
        lab = self.label
        if not lab.is_periodic or lab.name != self.case.expected:
            return False
        return (lab.period_multiple > 1) == self.case.doubled


def compute_cases(cases, t_transient: float = 200 * FORCING_PERIOD) -> list[CaseResult]:
    out = []
    for c in cases:
        seq, lab = simulate_and_classify(c.params(), c.init, t_transient=t_transient)
        out.append(CaseResult(c, lab, seq))
    return out


def compute_fig2() -> list[CaseResult]:
    return compute_cases(FIG2_CASES, FIG2_TRANSIENT)


def compute_fig3() -> list[CaseResult]:
    return compute_cases(FIG3_CASES)


def _write_case_outputs(results: list[CaseResult], out: str, stem: str, svg: bool,
                        periods: int = 2):
    rows = []
    for res in results:
        c, lab, seq = res.case, res.label, res.sequence
        rows.append({"panel": c.panel, "beta": c.beta, "gbar": c.gbar, "d": c.d, "v0": c.v0,
                     "phi": c.phi, "expected": c.expected + (" doubled" if c.doubled else ""),
                     "pattern": lab.name, "period_multiple": lab.period_multiple,
                     "bottom_per_cycle": lab.bottom_per_cycle, "top_per_cycle": lab.top_per_cycle,
                     "match": res.matches})
        if seq is None:
            continue
        base = os.path.join(out, f"{stem}_{c.panel}")
        write_impacts_csv(base + "_impacts.csv", seq.events)
        span = max(periods, lab.period_multiple) * FORCING_PERIOD
        tail = [e for e in seq.events if e.t >= seq.events[-1].t - span]
        if len(tail) >= 2:
            traj = reconstruct_absolute(sample_trajectory(tail, seq.params, seq.forcing),
                                        seq.params, seq.forcing)
            write_trajectory_csv(base + "_trajectory.csv", traj)
            if svg:
                _svg(base + "_trajectory.svg", svgplot.render_trajectory(
                    base + "_trajectory.csv", f"{stem} ({c.panel})"))
                _svg(base + "_phase.svg", svgplot.render_phase(
                    base + "_trajectory.csv", f"{stem} ({c.panel})"))
    write_rows(os.path.join(out, f"{stem}_patterns.csv"), rows)
    return rows


# ---------------------------------------------------------------------------
# fig4 / fig5: 2:1 branches and their stability


@dataclass
class BranchSummary:
    beta_key: str
    branch: object
    windows: list
    critical: list
    params: SystemParams


def compute_branch(beta_key: str, d_range=BRANCH_RANGE, step: float = BRANCH_STEP) -> BranchSummary:
    beta = BETAS[beta_key]
    params = SystemParams(r=R, d=BRANCH_SEED_D, gbar=gbar_from(M, beta, F_NORM))
    br = branch_both_ways("2:1", BRANCH_SEED_D, d_range[0], d_range[1], step, params)
    windows = stable_windows(br, params)
    crit = []
    for name in ("lambda_crosses_minus_one", "delta_crosses_zero", "loop_grazing"):
        crit += locate_critical(br, name, params)
    crit.sort(key=lambda c: c.d)
    return BranchSummary(beta_key, br, windows, crit, params)


def _physical():
    return PhysicalParams(M=M, s=1.0, omega=OMEGA, F_norm=F_NORM, beta=math.pi / 2)


def write_branch(summary: BranchSummary, out: str, svg: bool, stem: str, vlines=()):
    base = os.path.join(out, stem)
    branch_energy(summary.branch.points, VoltageModel())
    write_sweep_csv(base + "_branch.csv", summary.branch.points, _physical())
    write_critical_csv(base + "_critical.csv", summary.critical)
    lo_s, hi_s = FIG4_S_RANGE[summary.beta_key]
    meta = {"beta": BETAS[summary.beta_key], "gbar": summary.params.gbar,
            "caption_d_window": [d_from_s(lo_s), d_from_s(hi_s)],
            "stable_windows": summary.windows,
            "published_stable_window": STABLE_WINDOWS[summary.beta_key],
            "branch_end": summary.branch.end_reason,
            "critical": [(c.kind, c.d) for c in summary.critical]}
    with open(base + "_summary.json", "w") as fh:
        json.dump(meta, fh, indent=2)
    if svg:
        _svg(base + "_branch.svg", svgplot.render_sweep(
            base + "_branch.csv", base + "_critical.csv", stem, vlines=vlines))
        _svg(base + "_stability.svg", svgplot.render_stability(base + "_branch.csv", stem))
    return meta


# ---------------------------------------------------------------------------
# fig6: grazing hysteresis and bistability


def compute_grazing(direction: str) -> GrazingResult:
    params = SystemParams(r=R, d=GRAZE_RANGE[1], gbar=gbar_from(M, math.pi / 6, F_NORM))
    return grazing_scan(params, GRAZE_RANGE, direction)


def compute_bistability(ds=(0.14,)):
    params = SystemParams(r=R, d=ds[0], gbar=gbar_from(M, math.pi / 6, F_NORM))
    return bistability_report(params, ds, d_above=GRAZE_RANGE[1], d_below=GRAZE_RANGE[0])


def write_grazing(results: list[GrazingResult], out: str):
    rows = [{"direction": g.direction, "d": g.d, "bracket_lo": g.bracket[0],
             "bracket_hi": g.bracket[1], "pattern_before": g.label_before.name,
             "pattern_after": g.label_after.name, "min_bottom_v_before": g.min_bottom_v_before,
             "min_bottom_v_after": g.min_bottom_v_after} for g in results]
    write_rows(os.path.join(out, "grazing.csv"), rows)
    lineage = [{"direction": g.direction, "d": s.d, "pattern": s.label.name,
                "period_multiple": s.label.period_multiple, "min_bottom_v": s.min_bottom_v}
               for g in results for s in g.lineage]
    write_rows(os.path.join(out, "grazing_lineage.csv"), lineage)


def write_bistability(report, out: str):
    rows = []
    for d, atts in report:
        for a in atts:
            for side, v, ph, dt in a.impacts:
                rows.append({"d": d, "lineage": a.lineage, "pattern": a.label.name,
                             "side": side, "v_pre": v, "phase": ph, "dt_next": dt})
    write_rows(os.path.join(out, "bistability.csv"), rows)


# ---------------------------------------------------------------------------
# fig7: energy along simulated lineages


def _lineage_points(params, ds, gbar_of: Callable[[float], float] | None = None):
    if gbar_of is None:
        steps = hysteresis_sweep(params, ds)
    else:  # physical sweeps: gravity term changes with the forcing amplitude
        steps = []
        state = None
        for d in ds:
            p = SystemParams(r=params.r, d=d, gbar=gbar_of(d), phi=params.phi)
            steps.extend(hysteresis_sweep(p, [d], init=state))
            last = steps[-1]
            state = last.sequence.warm_start() if last.sequence is not None else None
    points = []
    for s in steps:
        if s.sequence is None or not s.label.is_periodic:
            points.append(BranchPoint(d=s.d, source="simulated", label=s.label))
            continue
        points.append(BranchPoint(d=s.d, source="simulated", label=s.label, sequence=s.sequence))
    return points


def compute_energy_lineage(beta_key: str, model: VoltageModel = VoltageModel(),
                           s_range=FIG7_S_RANGE, step: float = FIG7_STEP):
    """Downward lineage in ``d`` over the published ``s`` window at fixed forcing."""
    beta = BETAS[beta_key]
    d_hi, d_lo = d_from_s(s_range[1]), d_from_s(s_range[0])
    ds = [float(x) for x in np.arange(d_hi, d_lo - 1e-12, -step)]
    params = SystemParams(r=R, d=ds[0], gbar=gbar_from(M, beta, F_NORM))
    pts = _lineage_points(params, ds)
    branch_energy([p for p in pts if p.sequence is not None], model)
    return pts


def compute_energy_force_lineage(beta_key: str, model: VoltageModel = VoltageModel(),
                                 n: int = 65):
    """Lineage at fixed ``s`` with the forcing amplitude increasing (``d`` decreasing)."""
    beta = BETAS[beta_key]
    Fs = np.linspace(FIG7_F_RANGE[0], FIG7_F_RANGE[1], n)
    ds = [float(d_from_s(FIG7_FIXED_S, F)) for F in Fs]
    # F = s M omega^2 / (d pi^2) inverts the length scaling at fixed s
    params = SystemParams(r=R, d=ds[0], gbar=gbar_from(M, beta, Fs[0]))

    def gbar_of(d):
        return gbar_from(M, beta, FIG7_FIXED_S * M * OMEGA ** 2 / (d * math.pi ** 2))

    pts = _lineage_points(params, ds, gbar_of)
    branch_energy([p for p in pts if p.sequence is not None], model)
    return pts


def energy_rows(points) -> list[dict]:
    rows = []
    for p in points:
        e = p.energy
        rows.append({"d": p.d, "s_equiv": s_from_d(p.d, M, OMEGA, F_NORM),
                     "pattern": p.label.name if p.label else "",
                     "period_multiple": p.label.period_multiple if p.label else "",
                     "U_k_list": ";".join(format(u, ".17g") for u in e.U_list) if e else "",
                     "U_I_avg": e.U_I_avg if e else "", "U_T_avg": e.U_T_avg if e else ""})
    return rows


def transitions(points, before: Callable, after: Callable):
    """Adjacent periodic points ``(a, b)`` in lineage order with ``before(a)`` and the
    first later point satisfying ``after(b)``."""
    out = []
    per = [p for p in points if p.energy is not None]
    for i, a in enumerate(per[:-1]):
        if not before(a.label):
            continue
        nxt = per[i + 1]
        if after(nxt.label):
            out.append((a, nxt))
    return out


# ---------------------------------------------------------------------------
# helpers


def _g(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return v


def write_rows(path, rows: list[dict]):
    keys = list(rows[0].keys()) if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        for r in rows:
            w.writerow({k: _g(v) for k, v in r.items()})


def _svg(path, text: str):
    with open(path, "w") as fh:
        fh.write(text)


RECIPES = ("fig2", "fig3", "fig4-beta90", "fig4-beta60", "fig4-beta45", "fig4-beta30",
           "fig5", "fig6", "fig7")


def describe(name: str) -> dict:
    """Pinned parameters of a recipe (for ``--dump-config``)."""
    if name == "fig2":
        return {"cases": [asdict(c) for c in FIG2_CASES], "t_transient": FIG2_TRANSIENT}
    if name == "fig3":
        return {"cases": [asdict(c) for c in FIG3_CASES]}
    if name.startswith("fig4-beta"):
        key = name[len("fig4-beta"):]
        return {"beta": BETAS[key], "d_range": BRANCH_RANGE, "d_seed": BRANCH_SEED_D,
                "d_step": BRANCH_STEP, "caption_s_range": FIG4_S_RANGE[key]}
    if name == "fig5":
        return {"betas": BETAS, "d_range": BRANCH_RANGE, "d_step": BRANCH_STEP}
    if name == "fig6":
        return {"beta": math.pi / 6, "d_range": GRAZE_RANGE,
                "cases": [asdict(c) for c in FIG6_CASES]}
    if name == "fig7":
        return {"betas": BETAS, "s_range": FIG7_S_RANGE, "d_step": FIG7_STEP,
                "fixed_s": FIG7_FIXED_S, "F_range": FIG7_F_RANGE}
    raise KeyError(name)


def solved_orbit_rows(params: SystemParams, kind: str) -> list[dict]:
    finder = find_orbits_2to1 if kind == "2:1" else find_orbits_1to1
    rows = []
    for o in finder(params):
        rec = o.to_record()
        try:
            rec.update(compose_DP(o).to_record())
        except Exception as exc:  # grazing leg: no linearisation
            rec["class"] = type(exc).__name__
        rec["valid"] = o.valid
        rows.append(rec)
    return rows

