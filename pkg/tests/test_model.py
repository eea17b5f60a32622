import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from impact_harvest.errors import DomainError
from impact_harvest.model import (PhysicalParams, SystemParams, cosine_forcing, gbar_from,
                                  nondimensionalize, s_from_d, wrap_phase, zero_forcing)

M = 0.1245
OMEGA = 5 * math.pi


def test_gbar_incline_30_degrees():
    # 0.1245 * 9.8 * 0.5 / 5, evaluated by hand
    p = nondimensionalize(PhysicalParams(M=M, s=0.27, omega=OMEGA, F_norm=5.0, beta=math.pi / 6))
    assert p.gbar == pytest.approx(0.122010, abs=1e-12)


def test_gbar_vertical_strong_forcing():
    # 0.1245 * 9.8 / 61
    assert gbar_from(M, math.pi / 2, 61.0) == pytest.approx(0.0200016393, abs=1e-10)


def test_gbar_horizontal_limit_is_zero():
    assert gbar_from(M, 0.0, 5.0) == 0.0


def test_length_scaling():
    # 0.27 * 0.1245 * 25 pi^2 / (5 pi^2) = 0.168075
    p = nondimensionalize(PhysicalParams(M=M, s=0.27, omega=OMEGA, F_norm=5.0, beta=math.pi / 6))
    assert p.d == pytest.approx(0.168075, abs=1e-12)
    assert s_from_d(p.d, M, OMEGA, 5.0) == pytest.approx(0.27, abs=1e-12)


def test_restitution_passes_through():
    phys = PhysicalParams(M=M, s=0.3, omega=OMEGA, F_norm=5.0, beta=1.0)
    assert nondimensionalize(phys, r=0.7).r == 0.7


@pytest.mark.parametrize("field", ["M", "s", "omega", "F_norm", "beta", "g"])
def test_physical_params_reject_non_positive(field):
    kw = dict(M=M, s=0.3, omega=OMEGA, F_norm=5.0, beta=1.0, g=9.8)
    kw[field] = 0.0
    with pytest.raises(DomainError):
        PhysicalParams(**kw)


def test_physical_params_reject_steep_incline():
    with pytest.raises(DomainError):
        PhysicalParams(M=M, s=0.3, omega=OMEGA, F_norm=5.0, beta=2.0)


@pytest.mark.parametrize("kw", [dict(r=1.0, d=0.1, gbar=0.1), dict(r=0.0, d=0.1, gbar=0.1),
                                dict(r=0.5, d=0.0, gbar=0.1), dict(r=0.5, d=0.1, gbar=-0.1)])
def test_system_params_invariants(kw):
    with pytest.raises(DomainError):
        SystemParams(**kw)


def test_phase_stored_mod_two_pi():
    p = SystemParams(r=0.5, d=0.2, gbar=0.1, phi=7.0)
    assert p.phi == pytest.approx(7.0 - 2 * math.pi)
    assert wrap_phase(-0.5) == pytest.approx(2 * math.pi - 0.5)


def test_cosine_forcing_at_zero_argument():
    fo = cosine_forcing(0.3)
    t = -0.3 / math.pi
    assert fo.f(t) == pytest.approx(1.0)
    assert fo.F1(t) == pytest.approx(0.0, abs=1e-15)
    assert fo.F2(t) == pytest.approx(-1.0 / math.pi ** 2)


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 50), st.floats(0, 2 * math.pi))
def test_cosine_forcing_bounded_and_periodic(t, phi):
    fo = cosine_forcing(phi)
    assert abs(fo.f(t)) <= 1.0
    assert fo.F1(t + 2) - fo.F1(t) == pytest.approx(0.0, abs=1e-12)
    assert fo.F2(t + 2) - fo.F2(t) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(-10, 10), st.floats(0, 2 * math.pi))
def test_antiderivatives_by_finite_differences(t, phi):
    fo = cosine_forcing(phi)
    h = 1e-5
    assert (fo.F1(t + h) - fo.F1(t - h)) / (2 * h) == pytest.approx(fo.f(t), abs=1e-9)
    assert (fo.F2(t + h) - fo.F2(t - h)) / (2 * h) == pytest.approx(fo.F1(t), abs=1e-9)


def test_unit_norm():
    ts = np.linspace(0, 2, 2001)
    assert np.max(np.abs(cosine_forcing(1.1).f(ts))) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("t0,t1", [(0.1, 0.1 + 1e-7), (0.3, 0.31), (0.2, 1.7), (-1.0, 3.5)])
def test_flight_integrals_against_quadrature(t0, t1):
    fo = cosine_forcing(0.7)
    single = quad(fo.f, t0, t1, epsabs=1e-15, epsrel=1e-12, limit=200)[0]
    double = quad(lambda u: (t1 - u) * fo.f(u), t0, t1, epsabs=1e-15, epsrel=1e-12, limit=200)[0]
    assert fo.single_integral(t0, t1) == pytest.approx(single, abs=1e-14)
    assert fo.double_integral(t0, t1) == pytest.approx(double, abs=1e-14)


def test_phase_acts_as_time_shift():
    base, shifted = cosine_forcing(0.0), cosine_forcing(0.9)
    for t in (0.0, 0.4, 1.3):
        assert shifted.f(t) == pytest.approx(base.f(t + 0.9 / math.pi))
        assert shifted.F2(t) == pytest.approx(base.F2(t + 0.9 / math.pi))


def test_zero_forcing_vanishes():
    fo = zero_forcing()
    assert fo.f(0.3) == 0.0 and fo.F1(1.2) == 0.0 and fo.double_integral(0.0, 1.0) == 0.0


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(1.0, 50.0), st.floats(0.1, 10.0))
def test_length_scaling_homogeneous(s, F, c):
    a = nondimensionalize(PhysicalParams(M=M, s=s, omega=OMEGA, F_norm=F, beta=1.0))
    b = nondimensionalize(PhysicalParams(M=M, s=s * c, omega=OMEGA, F_norm=F * c, beta=1.0))
    assert b.d == pytest.approx(a.d, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(1.0, 50.0), st.floats(1.01, 3.0), st.floats(0.05, math.pi / 2))
def test_gravity_term_decreases_with_forcing(F, k, beta):
    assert gbar_from(M, beta, F * k) < gbar_from(M, beta, F)
