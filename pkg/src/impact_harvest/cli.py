"""Command-line front end: ``impact-harvest <scenario> [options]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure (a
``diagnostics.json`` is written to the output directory).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import recipes, svgplot
from .energy import VoltageModel, averages, branch_energy, write_energy_csv
from .errors import DomainError, HarvestError
from .model import FORCING_PERIOD, PhysicalParams, SystemParams, nondimensionalize
from .simulator import (reconstruct_absolute, sample_trajectory, simulate_and_classify,
                        write_impacts_csv, write_trajectory_csv)
from .solver import find_orbits_1to1, find_orbits_2to1, solve_1to1, solve_2to1
from .stability import compose_DP
from .sweep import (BranchPoint, branch_both_ways, continue_branch, grazing_scan,
                    hysteresis_sweep, locate_critical, stable_windows, write_critical_csv,
                    write_sweep_csv)

SCENARIOS = ("simulate", "solve", "sweep", "graze", "energy", "reproduce")
ENV_JOBS = "IMPACT_HARVEST_JOBS"


class ConfigError(ValueError):
    """Configuration does not validate."""


@dataclass
class RunConfig:
    scenario: str = "simulate"
    recipe: str | None = None
    params: dict = field(default_factory=dict)  # r, d, gbar, phi
    physical: dict | None = None  # M, s, omega, F_norm, beta (radians)
    orbit_type: str = "2:1"
    init: list | None = None  # [Z0, Zdot0, t0]
    guess: list | None = None
    t_transient: float = 200 * FORCING_PERIOD
    t_window: float = 40 * FORCING_PERIOD
    sweep: dict = field(default_factory=dict)  # d_lo, d_hi, d_step, d_seed, direction
    voltage: dict = field(default_factory=lambda: {"kind": "power", "c": 1.0, "gamma": 2.0})
    out: str = "out"
    format: str = "csv"
    svg: bool = False
    jobs: int = 1
    seed_grid: bool = False

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def system_params(self) -> SystemParams:
        """Dimensionless parameters; explicit ``params`` win over ``physical``."""
        p = dict(self.params)
        try:
            if {"d", "gbar"} <= set(p):
                return SystemParams(r=p.get("r", 0.5), d=p["d"], gbar=p["gbar"], phi=p.get("phi", 0.0))
            if self.physical:
                base = nondimensionalize(PhysicalParams(**self.physical), phi=p.get("phi", 0.0),
                                         r=p.get("r", 0.5))
                if "d" in p:
                    base = base.with_d(p["d"])
                return base
        except (TypeError, DomainError) as exc:
            raise ConfigError(str(exc)) from exc
        raise ConfigError("parameters need d and gbar, or a physical parameter set")

    def voltage_model(self) -> VoltageModel:
        v = dict(self.voltage)
        kind = v.pop("kind", "power")
        try:
            if kind == "table":
                return VoltageModel.table(v["speeds"], v["outputs"], v.get("U_in", 0.0))
            return VoltageModel.power_law(v.get("c", 1.0), v.get("gamma", 2.0), v.get("U_in", 0.0))
        except (KeyError, DomainError) as exc:
            raise ConfigError(f"bad voltage model: {exc}") from exc

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if self.orbit_type not in ("2:1", "1:1"):
            raise ConfigError("orbit_type must be 2:1 or 1:1")
        if not (isinstance(self.jobs, int) and self.jobs >= 1):
            raise ConfigError("jobs must be a positive integer")
        if self.scenario == "reproduce":
            if self.recipe not in recipes.RECIPES:
                raise ConfigError(f"unknown recipe {self.recipe!r}; choose from {recipes.RECIPES}")
            return
        self.system_params()
        self.voltage_model()
        if self.scenario in ("sweep", "graze", "energy") and self.sweep:
            lo, hi = self.sweep.get("d_lo"), self.sweep.get("d_hi")
            if lo is None or hi is None or not (hi > lo > 0.0):
                raise ConfigError("sweep needs 0 < d_lo < d_hi")
            if not self.sweep.get("d_step", 1e-3) > 0.0:
                raise ConfigError("sweep step must be positive")
        elif self.scenario in ("sweep", "graze"):
            raise ConfigError(f"{self.scenario} needs a sweep range (--d-range)")
        if self.scenario == "graze" and self.sweep.get("direction", "both") not in ("down", "up", "both"):
            raise ConfigError("direction must be down, up or both")
        if self.init is not None and len(self.init) != 3:
            raise ConfigError("init is [Z0, Zdot0, t0]")


# ---------------------------------------------------------------------------
# parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--svg", action="store_true", default=None, help="also render SVG plots")
    common.add_argument("--jobs", type=int, help=f"worker processes (env {ENV_JOBS} overrides)")
    common.add_argument("--seed-grid", action="store_true", default=None,
                        help="cold-start the solver from the full seed grid")
    common.add_argument("--dump-config", action="store_true",
                        help="print the resolved configuration as JSON and exit")
    common.add_argument("--r", type=float)
    common.add_argument("--d", type=float)
    common.add_argument("--gbar", type=float)
    common.add_argument("--phi", type=float)
    common.add_argument("--M", type=float, help="mass [kg]")
    common.add_argument("--s", type=float, help="cylinder length [m]")
    common.add_argument("--omega", type=float, help="forcing frequency [rad/s]")
    common.add_argument("--F", type=float, dest="F_norm", help="forcing amplitude [N]")
    common.add_argument("--beta", type=float, help="incline [rad]")
    common.add_argument("--type", dest="orbit_type", choices=("2:1", "1:1"))
    common.add_argument("--init", type=float, nargs=3, metavar=("Z0", "ZDOT0", "T0"))
    common.add_argument("--guess", type=float, nargs="+")
    common.add_argument("--transient", type=float, dest="t_transient", help="time units")
    common.add_argument("--window", type=float, dest="t_window", help="time units")
    common.add_argument("--d-range", type=float, nargs=2, metavar=("LO", "HI"))
    common.add_argument("--d-step", type=float)
    common.add_argument("--d-seed", type=float)
    common.add_argument("--direction", choices=("down", "up", "both"))
    common.add_argument("--gamma", type=float, help="power-law voltage exponent")

    parser = argparse.ArgumentParser(prog="impact-harvest", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name, text in (("simulate", "long-run simulation and pattern label"),
                       ("solve", "periodic orbits and their stability"),
                       ("sweep", "2:1 or 1:1 branch continuation over d"),
                       ("graze", "grazing hysteresis scan"),
                       ("energy", "voltage averages (single run or simulated sweep)")):
        sub.add_parser(name, parents=[common], help=text)
    rep = sub.add_parser("reproduce", parents=[common], help="named figure recipe")
    rep.add_argument("recipe", choices=recipes.RECIPES)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    data: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    cfg = RunConfig.from_dict(data) if data else RunConfig()
    cfg.scenario = args.scenario
    if args.scenario == "reproduce":
        cfg.recipe = args.recipe
    for key in ("out", "format", "svg", "jobs", "seed_grid", "orbit_type", "guess",
                "t_transient", "t_window"):
        val = getattr(args, key)
        if val is not None:
            setattr(cfg, key, val)
    if args.init is not None:
        cfg.init = list(args.init)
    for key in ("r", "d", "gbar", "phi"):
        val = getattr(args, key)
        if val is not None:
            cfg.params[key] = val
    phys = {k: getattr(args, k) for k in ("M", "s", "omega", "F_norm", "beta")
            if getattr(args, k) is not None}
    if phys:
        cfg.physical = {**(cfg.physical or {}), **phys}
    if args.d_range is not None:
        cfg.sweep["d_lo"], cfg.sweep["d_hi"] = args.d_range
    for key, dest in (("d_step", "d_step"), ("d_seed", "d_seed"), ("direction", "direction")):
        val = getattr(args, key)
        if val is not None:
            cfg.sweep[dest] = val
    if args.gamma is not None:
        cfg.voltage = {"kind": "power", "c": cfg.voltage.get("c", 1.0), "gamma": args.gamma}
    env = os.environ.get(ENV_JOBS)
    if env:
        try:
            cfg.jobs = int(env)
        except ValueError as exc:
            raise ConfigError(f"{ENV_JOBS} must be an integer") from exc
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# execution


def pmap(fn, items, jobs: int):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as ex:
        return list(ex.map(fn, items))


def _emit(cfg: RunConfig, stem: str, rows: list[dict]):
    path = os.path.join(cfg.out, f"{stem}.{cfg.format}")
    if cfg.format == "json":
        with open(path, "w") as fh:
            json.dump(rows, fh, indent=2, default=_json_default)
    else:
        recipes.write_rows(path, rows)
    return path


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def _default_init(p: SystemParams, cfg: RunConfig):
    return tuple(cfg.init) if cfg.init is not None else (p.d / 2, 0.5, 0.0)


def run_simulate(cfg: RunConfig) -> int:
    p = cfg.system_params()
    seq, lab = simulate_and_classify(p, _default_init(p, cfg), cfg.t_transient, cfg.t_window)
    summary = {"pattern": lab.name, "period_multiple": lab.period_multiple,
               "n": lab.n, "m": lab.m, "classification": lab.classification, **p.as_dict()}
    _emit(cfg, "pattern", [summary])
    if seq is None:
        return 0
    write_impacts_csv(os.path.join(cfg.out, "impacts.csv"), seq.events)
    traj = reconstruct_absolute(sample_trajectory(seq.events, p, seq.forcing), p, seq.forcing)
    tpath = os.path.join(cfg.out, "trajectory.csv")
    write_trajectory_csv(tpath, traj)
    if cfg.svg:
        _write(os.path.join(cfg.out, "trajectory.svg"), svgplot.render_trajectory(tpath, "simulate"))
        _write(os.path.join(cfg.out, "phase.svg"), svgplot.render_phase(tpath, "simulate"))
    return 0


def run_solve(cfg: RunConfig) -> int:
    p = cfg.system_params()
    if cfg.guess is not None and not cfg.seed_grid:
        solver = solve_2to1 if cfg.orbit_type == "2:1" else solve_1to1
        orbits = [solver(p, np.asarray(cfg.guess, float))]
    else:
        finder = find_orbits_2to1 if cfg.orbit_type == "2:1" else find_orbits_1to1
        orbits = finder(p)
    rows = []
    for o in orbits:
        rec = o.to_record()
        rec.pop("diagnostics", None)
        try:
            rec.update(compose_DP(o).to_record())
        except HarvestError as exc:
            rec["class"] = type(exc).__name__
        rows.append(rec)
    _emit(cfg, "orbits", rows)
    return 0


def run_sweep(cfg: RunConfig) -> int:
    p = cfg.system_params()
    sw = cfg.sweep
    lo, hi = sw["d_lo"], sw["d_hi"]
    step = sw.get("d_step", 1e-3)
    seed_d = sw.get("d_seed", 0.5 * (lo + hi))
    if not lo <= seed_d <= hi:
        raise ConfigError("d_seed must lie inside the sweep range")
    seed = np.asarray(cfg.guess, float) if cfg.guess is not None else None
    if seed_d in (lo, hi):
        br = continue_branch(cfg.orbit_type, (seed_d, hi if seed_d == lo else lo), step, p, seed)
    else:
        br = branch_both_ways(cfg.orbit_type, seed_d, lo, hi, step, p, seed)
    crit = []
    for name in ("lambda_crosses_minus_one", "delta_crosses_zero"):
        crit += locate_critical(br, name, p)
    if cfg.orbit_type == "2:1":
        crit += locate_critical(br, "loop_grazing", p)
    crit.sort(key=lambda c: c.d)
    branch_energy(br.points, cfg.voltage_model())
    path = os.path.join(cfg.out, "sweep.csv")
    physical = PhysicalParams(**cfg.physical) if cfg.physical else None
    write_sweep_csv(path, br.points, physical)
    cpath = os.path.join(cfg.out, "critical.csv")
    write_critical_csv(cpath, crit)
    summary = {"stable_windows": stable_windows(br, p), "branch_end": br.end_reason,
               "critical": [(c.kind, c.d) for c in crit]}
    with open(os.path.join(cfg.out, "sweep_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    if cfg.svg:
        _write(os.path.join(cfg.out, "sweep.svg"), svgplot.render_sweep(path, cpath, "branch"))
    return 0


def run_graze(cfg: RunConfig) -> int:
    p = cfg.system_params()
    sw = cfg.sweep
    dirs = ("down", "up") if sw.get("direction", "both") == "both" else (sw["direction"],)
    results = [grazing_scan(p, (sw["d_lo"], sw["d_hi"]), d, sw.get("d_step", 1e-3),
                            t_transient=cfg.t_transient, t_window=cfg.t_window) for d in dirs]
    recipes.write_grazing(results, cfg.out)
    return 0


def run_energy(cfg: RunConfig) -> int:
    p = cfg.system_params()
    model = cfg.voltage_model()
    if not cfg.sweep:
        seq, lab = simulate_and_classify(p, _default_init(p, cfg), cfg.t_transient, cfg.t_window)
        if seq is None:
            raise HarvestError("chatter: no impact sequence to average")
        write_energy_csv(os.path.join(cfg.out, "energy.csv"), seq.events, model)
        e = averages(seq, model)
        _emit(cfg, "energy_summary", [{"pattern": lab.name, "U_I_avg": e.U_I_avg,
                                       "U_T_avg": e.U_T_avg, "n_impacts": e.n_impacts,
                                       "t0": e.window[0], "tf": e.window[1]}])
        return 0
    sw = cfg.sweep
    step = sw.get("d_step", 5e-3)
    ds = list(np.arange(sw["d_hi"], sw["d_lo"] - 1e-12, -step))
    if sw.get("direction") == "up":
        ds = ds[::-1]
    steps = hysteresis_sweep(p, [float(d) for d in ds], init=cfg.init,
                             t_transient=cfg.t_transient, t_window=cfg.t_window)
    pts = [BranchPoint(d=s.d, source="simulated", label=s.label,
                       sequence=s.sequence if s.label.is_periodic else None) for s in steps]
    branch_energy([q for q in pts if q.sequence is not None], model)
    path = os.path.join(cfg.out, "energy_sweep.csv")
    recipes.write_rows(path, recipes.energy_rows(pts))
    if cfg.svg:
        _write(os.path.join(cfg.out, "energy_sweep.svg"), svgplot.render_energy(path, "energy"))
    return 0


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def _fig4_job(key):
    return recipes.compute_branch(key)


def _fig7_job(job):
    kind, key = job
    if kind == "s":
        return recipes.compute_energy_lineage(key)
    return recipes.compute_energy_force_lineage(key)


def run_reproduce(cfg: RunConfig) -> int:
    name, out, svg = cfg.recipe, cfg.out, cfg.svg
    if name in ("fig2", "fig3"):
        res = recipes.compute_fig2() if name == "fig2" else recipes.compute_fig3()
        recipes._write_case_outputs(res, out, name, svg)
        return 0
    if name.startswith("fig4-beta") or name == "fig5":
        keys = [name[len("fig4-beta"):]] if name != "fig5" else list(recipes.BETAS)
        summaries = pmap(_fig4_job, keys, cfg.jobs)
        vlines = ()
        if name == "fig4-beta30":
            graze = [recipes.compute_grazing(d) for d in ("down", "up")]
            recipes.write_grazing(graze, out)
            vlines = ((graze[0].d, "G1", "#000000"), (graze[1].d, "G2", "#c0392b"))
        for s in summaries:
            stem = f"fig4_beta{s.beta_key}" if name != "fig5" else f"fig5_beta{s.beta_key}"
            recipes.write_branch(s, out, svg, stem, vlines)
        return 0
    if name == "fig6":
        graze = [recipes.compute_grazing(d) for d in ("down", "up")]
        recipes.write_grazing(graze, out)
        lo, hi = graze[0].d, graze[1].d
        ds = sorted({0.14, *[round(x, 4) for x in np.linspace(lo, hi, 5)[1:-1]]})
        recipes.write_bistability(recipes.compute_bistability(ds), out)
        return 0
    if name == "fig7":
        jobs = [("s", k) for k in recipes.BETAS] + [("F", "90"), ("F", "30")]
        results = pmap(_fig7_job, jobs, cfg.jobs)
        for (kind, key), pts in zip(jobs, results):
            stem = f"fig7_{'s' if kind == 's' else 'force'}_beta{key}"
            path = os.path.join(out, stem + ".csv")
            recipes.write_rows(path, recipes.energy_rows(pts))
            if svg:
                _write(os.path.join(out, stem + ".svg"), svgplot.render_energy(path, stem))
        return 0
    raise ConfigError(f"unknown recipe {name!r}")  # pragma: no cover


RUNNERS = {"simulate": run_simulate, "solve": run_solve, "sweep": run_sweep,
           "graze": run_graze, "energy": run_energy, "reproduce": run_reproduce}


def run(cfg: RunConfig) -> int:
    os.makedirs(cfg.out, exist_ok=True)
    try:
        return RUNNERS[cfg.scenario](cfg)
    except ConfigError:
        raise
    except (HarvestError, ArithmeticError, np.linalg.LinAlgError) as exc:
        diag = {"error": type(exc).__name__, "message": str(exc),
                "traceback": traceback.format_exc(), "config": cfg.to_dict()}
        with open(os.path.join(cfg.out, "diagnostics.json"), "w") as fh:
            json.dump(diag, fh, indent=2, default=_json_default)
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
        if args.dump_config:
            print(json.dumps(cfg.to_dict(), indent=2, default=_json_default))
            return 0
        return run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
