import math

import numpy as np
import pytest

from conftest import params30
from impact_harvest.errors import Chatter, InsufficientWindow, NoImpact
from impact_harvest.flight import ImpactEvent, MapKind, Side, map_residual
from impact_harvest.model import SystemParams, cosine_forcing, zero_forcing
from impact_harvest.simulator import (ImpactSequence, classify_pattern, cycle_events,
                                      iterate_impacts, read_impacts_csv, reconstruct_absolute,
                                      recurrence_error, sample_trajectory, simulate,
                                      simulate_and_classify, write_impacts_csv,
                                      write_trajectory_csv)


def _orbit_init(o):
    """Start on the cycle-opening bottom impact of a solved orbit, in the orbit's phase frame."""
    return o.params(), (o.d / 2, o.v_k, 0.0)


@pytest.fixture(scope="module")
def seq21(orbit21_016):
    p, init = _orbit_init(orbit21_016)
    return simulate(p, init, t_transient=20.0, t_window=80.0)


def test_solved_orbit_persists(seq21, orbit21_016):
    lab = classify_pattern(seq21)
    assert (lab.n, lab.m, lab.period_multiple) == (2, 1, 1)
    assert str(lab) == "2:1 x1"
    assert recurrence_error(seq21) < 1e-6
    v = sorted(e.v_pre for e in seq21.events[:3])
    assert np.allclose(v, sorted(orbit21_016.velocities), atol=1e-6)


def test_caption_init_one_to_one():
    p = params30(0.252, phi=0.128)
    _, lab = simulate_and_classify(p, (0.126, 0.669, 0.0))
    assert lab.name == "1:1"
    # a multiplier near -1 (about -0.98) leaves a slowly decaying two-period
    # wobble after 200 periods; a longer run settles on the simple orbit
    _, lab = simulate_and_classify(p, (0.126, 0.669, 0.0), t_transient=2000.0)
    assert lab.period_multiple == 1


def test_consecutive_impacts_satisfy_maps(seq21):
    p, fo = seq21.params, seq21.forcing
    for a, b in zip(seq21.events[:-1], seq21.events[1:]):
        rv, rz = map_residual(MapKind.between(a.side, b.side), a.t, a.v_pre, b.t, b.v_pre, p, fo)
        assert abs(rv) < 1e-9 and abs(rz) < 1e-9


def test_times_increase_and_sides_alternate_legally(seq21):
    ts = [e.t for e in seq21.events]
    assert all(b > a for a, b in zip(ts, ts[1:]))
    assert all(not (a.side is Side.TOP and b.side is Side.TOP)
               for a, b in zip(seq21.events, seq21.events[1:]))
    assert all(seq21.t_begin <= t <= seq21.t_end for t in ts)


def test_restart_from_recorded_impact(seq21):
    p = seq21.params
    k = 7
    ev = seq21.events[k]
    again = list(iterate_impacts(p, (ev.side.z(p.d), ev.v_pre, ev.t), t_stop=seq21.t_end))
    ref = seq21.events[k:]
    assert len(again) == len(ref)
    for a, b in zip(again, ref):
        assert a.side is b.side
        assert abs(a.t - b.t) < 1e-8 and abs(a.v_pre - b.v_pre) < 1e-8


def test_perturbed_start_reconverges(orbit21_016):
    p, (z0, v0, t0) = _orbit_init(orbit21_016)
    seq = simulate(p, (z0, v0 + 1e-3, t0 + 1e-3))
    assert recurrence_error(seq) < 1e-6
    cyc = cycle_events(seq, classify_pattern(seq))
    assert cyc[0].v_pre == pytest.approx(max(orbit21_016.velocities), abs=1e-6)


def test_label_invariant_under_window_doubling():
    p = params30(0.204, phi=6.106)
    init = (0.102, 0.532, 0.0)
    a = classify_pattern(simulate(p, init, t_window=80.0))
    b = classify_pattern(simulate(p, init, t_window=160.0))
    assert a == b


def test_period_doubled_one_to_one():
    # multipliers near -1 make the transient long, hence 1000 periods
    p = params30(0.222, phi=0.242)
    _, lab = simulate_and_classify(p, (0.111, 0.676, 0.0), t_transient=2000.0)
    assert lab.name == "1:1" and lab.period_multiple == 4


def test_window_too_short(seq21):
    short = ImpactSequence(seq21.events, seq21.params, seq21.forcing, 0.0, 20.0, 10.0)
    with pytest.raises(InsufficientWindow):
        classify_pattern(short)


def test_irregular_sequence_is_aperiodic():
    p = params30(0.2)
    fo = cosine_forcing()
    rng = np.random.default_rng(3)
    ts = np.cumsum(rng.uniform(0.3, 0.9, 200))
    evs = [ImpactEvent.make(t, Side.BOTTOM if i % 2 else Side.TOP, (1 if i % 2 else -1) * rng.uniform(0.1, 1),
                            p, fo) for i, t in enumerate(ts)]
    seq = ImpactSequence(evs, p, fo, 0.0, 0.0, float(ts[-1]))
    lab = classify_pattern(seq)
    assert lab.classification == "aperiodic" and not lab.is_periodic


def test_sticking_is_reported_as_chatter():
    # gravity-only bouncing on the bottom: flight times shrink geometrically
    p = SystemParams(r=0.5, d=0.2, gbar=1.0)
    with pytest.raises(Chatter):
        list(iterate_impacts(p, (0.1, 0.5, 0.0), forcing=zero_forcing(), t_stop=100.0))
    _, lab = simulate_and_classify(p, (0.1, 0.5, 0.0), t_transient=20.0, t_window=80.0,
                                   forcing=zero_forcing())
    assert lab.classification == "chatter"


def test_ball_that_never_lands():
    p = SystemParams(r=0.5, d=0.2, gbar=0.0)
    with pytest.raises(NoImpact):
        simulate(p, (0.0, 0.0, 0.0), forcing=zero_forcing())


def test_three_wall_touches_per_period():
    p = SystemParams(r=0.5, d=0.184, gbar=0.1245 * 9.8 * math.sin(math.pi / 3) / 5, phi=1.21)
    seq, lab = simulate_and_classify(p, (0.092, 0.2164, 0.0))
    assert lab.name == "2:1" and lab.period_multiple == 1
    t0 = seq.t_begin
    counts = [sum(1 for e in seq.events if t0 + 2 * k <= e.t < t0 + 2 * k + 2) for k in range(10)]
    assert counts == [3] * 10


def test_absolute_reconstruction_touches_walls(seq21):
    evs = seq21.events[:10]
    traj = reconstruct_absolute(sample_trajectory(evs, seq21.params, seq21.forcing),
                                seq21.params, seq21.forcing)
    d = seq21.params.d
    assert np.all(np.abs(traj.Z) <= d / 2 + 1e-10)
    assert np.all(traj.x_ball >= traj.X_bottom - 1e-10)
    assert np.all(traj.x_ball <= traj.X_top + 1e-10)
    for e in evs:
        i = int(np.argmin(np.abs(traj.t - e.t)))
        wall = traj.X_bottom[i] if e.side is Side.BOTTOM else traj.X_top[i]
        assert traj.x_ball[i] == pytest.approx(wall, abs=1e-12)
    assert traj.X_top[0] - traj.X_bottom[0] == pytest.approx(d)


def test_csv_exports(seq21, tmp_path):
    write_impacts_csv(tmp_path / "imp.csv", seq21.events)
    rows = read_impacts_csv(tmp_path / "imp.csv")
    assert len(rows) == len(seq21.events)
    assert float(rows[3]["v_pre"]) == seq21.events[3].v_pre
    traj = reconstruct_absolute(sample_trajectory(seq21.events[:5], seq21.params, seq21.forcing),
                                seq21.params, seq21.forcing)
    write_trajectory_csv(tmp_path / "traj.csv", traj)
    header = (tmp_path / "traj.csv").read_text().splitlines()[0]
    assert header == "t,Z,Zdot,X_top,X_bottom,x_ball"
