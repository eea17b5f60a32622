import math

import numpy as np
import pytest

from conftest import params30
from impact_harvest.errors import GrazingSingularity
from impact_harvest.flight import MapKind
from impact_harvest.model import SystemParams, cosine_forcing, zero_forcing
from impact_harvest.solver import resolve
from impact_harvest.stability import (StabilityClass, classify, closed_form_check, compose_DP,
                                      eigen_from_trace_det, fd_leg_jacobian, jacobian_single,
                                      leg_jacobians, matrix_rel_err, nearest_regime,
                                      report_from_matrix)
from impact_harvest.sweep import cold_start


def _legs(o):
    fo = cosine_forcing(o.phi_k)
    t = o.times
    v = o.velocities + (o.v_k,)
    sides = o.sides + (o.sides[0],)
    return fo, [(MapKind.between(sides[i], sides[i + 1]), t[i], v[i], t[i + 1])
                for i in range(len(o.velocities))]


@pytest.mark.parametrize("fixture", ["orbit21_016", "orbit21_0204", "orbit11_0252"])
def test_leg_jacobians_against_finite_differences(fixture, request):
    o = request.getfixturevalue(fixture)
    fo, legs = _legs(o)
    for kind, t_l, v_l, t_n in legs:
        A = jacobian_single(kind, t_l, v_l, t_n, o.params(), fo)
        B = fd_leg_jacobian(kind, t_l, v_l, t_n, o.params(), fo)
        assert matrix_rel_err(A, B) < 1e-5


def test_force_free_leg():
    p = SystemParams(r=0.5, d=0.2, gbar=0.0)
    J = jacobian_single("P2", 0.0, 0.4, 1.0, p, zero_forcing())
    assert J[1, 1] == -0.5
    assert J[1, 0] == 0.0


def test_grazing_leg_is_singular():
    # gravity-only: arrival speed r v - g T vanishes for T = r v / g
    p = SystemParams(r=0.5, d=0.2, gbar=0.1)
    with pytest.raises(GrazingSingularity):
        jacobian_single("P1", 0.0, 0.4, 0.5 * 0.4 / 0.1, p, zero_forcing())


def test_table_rows():
    delta, eig = eigen_from_trace_det(-1.5, 0.36)  # eigenvalues -1.2, -0.3
    assert delta > 0
    assert sorted(e.real for e in eig) == pytest.approx([-1.2, -0.3])
    assert classify(eig, delta) is StabilityClass.UNSTABLE_NODE

    delta, eig = eigen_from_trace_det(0.7, 0.49)  # |lambda| = 0.7, complex pair
    assert delta < 0
    assert [abs(e) for e in eig] == pytest.approx([0.7, 0.7])
    assert classify(eig, delta) is StabilityClass.STABLE_FOCUS

    delta, eig = eigen_from_trace_det(-0.5, 0.06)  # -0.2, -0.3
    assert classify(eig, delta) is StabilityClass.STABLE_NODE


def test_marginal_period_doubling():
    rep = report_from_matrix(np.diag([-1.0, -0.25]))
    assert rep.cls is StabilityClass.MARGINAL
    assert nearest_regime(rep) == "period-doubling boundary"
    assert rep.char_at_minus_one == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("fixture", ["orbit21_016", "orbit21_0204", "orbit11_0252"])
def test_report_invariants(fixture, request):
    o = request.getfixturevalue(fixture)
    rep = compose_DP(o)
    l1, l2 = rep.eigenvalues
    assert abs(l1 * l2 - rep.det) < 1e-10
    assert abs(l1 + l2 - rep.trace) < 1e-10
    assert rep.delta == pytest.approx(rep.trace ** 2 - 4 * rep.det, abs=1e-14)
    dets = np.prod([np.linalg.det(J) for J in rep.legs])
    assert abs(dets - rep.det) < 1e-10
    if rep.delta < 0:
        assert abs(l1) == pytest.approx(math.sqrt(rep.det), rel=1e-12)


def test_cyclic_reordering_keeps_eigenvalues(orbit21_016):
    J1, J2, J3 = leg_jacobians(orbit21_016)
    ref = np.sort_complex(np.linalg.eigvals(J3 @ J2 @ J1))
    for M in (J1 @ J3 @ J2, J2 @ J1 @ J3):
        assert np.allclose(np.sort_complex(np.linalg.eigvals(M)), ref, atol=1e-12)


def test_two_to_one_determinant_is_r_to_the_sixth(orbit21_016):
    assert compose_DP(orbit21_016).det == pytest.approx(0.5 ** 6, rel=1e-12)


def test_published_trace_expression_equals_determinant(orbit21_016, orbit21_0204):
    for o in (orbit21_016, orbit21_0204):
        chk = closed_form_check(o)
        assert chk["rel_err_vs_det"] < 1e-9
        assert chk["rel_err_vs_trace"] > 1e-3


def test_unstable_below_period_doubling():
    o = resolve(resolve(cold_start("2:1", params30(0.14)), params30(0.135)), params30(0.13))
    assert compose_DP(o).lambda_min < -1


@pytest.mark.parametrize("d", [0.165, 0.19, 0.215])
def test_stable_inside_window_beta60(d):
    g = 0.1245 * 9.8 * math.sin(math.pi / 3) / 5
    seed = cold_start("2:1", SystemParams(r=0.5, d=0.18, gbar=g))
    o = resolve(seed, SystemParams(r=0.5, d=d, gbar=g))
    rep = compose_DP(o)
    assert o.valid and max(rep.moduli) < 1


def test_record_fields(orbit21_016):
    rec = compose_DP(orbit21_016).to_record()
    assert set(rec) == {"trace", "det", "delta", "lambda_re", "lambda_im", "class"}
