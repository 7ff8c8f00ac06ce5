"""Celestial builders: potential expansion, reduction charts, skeleton, demo."""

import math

import numpy as np
import pytest

from paratori.celestial import (
    PrimarySystem,
    RestrictedField,
    TorusData,
    build_full_skeleton,
    build_restricted_field,
    escape_demo,
    expand_potential,
)
from paratori.cohomology import solve_manifold
from paratori.errors import HypothesisViolation, InsufficientTorusData
from paratori.fourier import FourierSeries
from paratori.model import validate


# ---------------------------------------------------------------- primaries


def test_center_of_mass_enforced():
    cap = 8
    one = FourierSeries.constant(1.0, 1, cap)
    zero = FourierSeries.zeros(1, cap)
    bad = PrimarySystem(masses=(1.0,), qx=(one,), qy=(zero,), omega=(0.3,))
    with pytest.raises(HypothesisViolation):
        bad.check()


def test_binary_is_exact_two_body_solution():
    sys = PrimarySystem.circular_binary(mass=0.5, radius=1.0)
    sys.check()
    # Kepler's third law for the circular pair: Omega^2 (2R)^3 = M_total
    Omega = 2 * math.pi * sys.omega[0]
    assert Omega ** 2 * 8.0 == pytest.approx(1.0, rel=1e-12)


# ------------------------------------------------------- potential expansion


def test_single_primary_potential_exact():
    sys = PrimarySystem.single(mass=2.0)
    V = expand_potential(sys, degree=6)
    assert V.x_coeff(1).average().real == pytest.approx(2.0)
    for l in range(2, 7):
        assert V.x_coeff(l).strip_norm() < 1e-14


def test_leading_coefficient_is_total_mass():
    sys = PrimarySystem.circular_binary(mass=0.5, radius=1.0)
    V = expand_potential(sys, degree=4)
    lead = V.x_coeff(1)
    assert lead.average().real == pytest.approx(1.0)
    assert lead.oscillatory().strip_norm() < 1e-14
    # 1/r^2 order cancels by the center-of-mass identity
    assert V.x_coeff(2).strip_norm() < 1e-14


def test_binary_r3_coefficient_vs_quadrature():
    # independent oracle: direct summed potential at large radius
    sys = PrimarySystem.circular_binary(mass=0.5, radius=1.0)
    V = expand_potential(sys, degree=5)
    c3 = V.x_coeff(3)
    r = 1.0e3
    for th in np.arange(6) / 6:
        for ph in np.arange(6) / 6:
            direct = sys.potential_direct(r, 2 * math.pi * th, (ph,))
            pred = c3.evaluate((th, ph)).real / r ** 3
            # the next surviving order is 1/r^5 (odd powers vanish by parity)
            assert abs((direct - 1.0 / r) - pred) * r ** 3 < 5.0 / r ** 2


# ---------------------------------------------------------- restricted model


def test_restricted_leading_data_exact():
    model, chart = build_restricted_field(PrimarySystem.single(), degree=8)
    assert model.a.coeffs == {(0,): (0.25 + 0j)}
    assert chart.a_value == 0.25
    assert chart.computed_N == 4 and chart.stated_N == 6
    assert np.allclose(np.diag(model.B_bar()), 0.25)
    assert validate(model) == []


def test_restricted_uv_decoupling_below_tail_order():
    model, _ = build_restricted_field(PrimarySystem.single(), degree=8, gtilde0=0.2)
    for jet in (model.f_N, model.f_tail, model.g_N[0], model.g_tail[0]):
        for (l, k), s in jet.terms.items():
            if l + sum(k) <= 5:
                assert k[1] == 0 and k[2] == 0, (l, k)


def test_restricted_chart_roundtrip():
    _, chart = build_restricted_field(PrimarySystem.single(), degree=6, gtilde0=0.1)
    rng = np.random.default_rng(5)
    for _ in range(10):
        v = 0.03 + 0.05 * rng.random()
        u, z1, z2 = 0.01 * rng.standard_normal(3)
        r, th, y, G = chart.to_physical(v, u, z1, z2)
        back = chart.to_model(r, th, y, G)
        assert np.allclose(back, [v, u, z1, z2], atol=1e-10)


def test_restricted_field_matches_chart_pushforward():
    # finite-difference pushforward of the physical equations
    sys = PrimarySystem.circular_binary(mass=0.5, radius=1.0)
    model, chart = build_restricted_field(sys, degree=8, gtilde0=0.1)
    fld = model.as_field(8)
    phys = RestrictedField(sys)
    state_m = np.array([0.05, 0.004, 0.03, -0.02])
    phys_state = np.array(chart.to_physical(*state_m))
    Xphys = phys.rhs(0.0, phys_state)
    eps = 1e-7
    J = np.zeros((4, 4))
    base = np.array(chart.to_model(*phys_state))
    for i in range(4):
        p = phys_state.copy()
        p[i] += eps
        J[:, i] = (np.array(chart.to_model(*p)) - base) / eps
    pushed = J @ Xphys
    got = fld.rhs(0.0, list(state_m) + [0.0])[:4]
    assert np.max(np.abs(got - pushed)) < 1e-6


def test_restricted_binary_solve_and_orders():
    sys = PrimarySystem.circular_binary(mass=0.5, radius=1.0)
    model, _ = build_restricted_field(sys, degree=9, gtilde0=0.1)
    assert validate(model) == []
    res = solve_manifold(model, 3)
    for entry in res.per_order:
        assert max(entry["below_order"].values()) < 1e-8


# -------------------------------------------------------------- full skeleton


def test_skeleton_declarations():
    td = TorusData(omega0=(math.sqrt(2), math.sqrt(3)), n=2,
                   c2=np.array([[0.3, 0.1], [0.1, 0.2]]),
                   angular_momentum_internal=1.5)
    model, declared = build_full_skeleton(td, G_n0=0.7)
    assert (declared["N"], declared["P"], declared["a"]) == (4, 6, 0.25)
    assert declared["total_angular_momentum"] == pytest.approx(1.5 + 0.7)
    assert model.declared_P == 6 and model.P == 4
    assert validate(model) == []


def test_skeleton_zero_tails_pure_model():
    td = TorusData(omega0=(math.sqrt(2), math.sqrt(3)), n=2)
    model, _ = build_full_skeleton(td)
    res = solve_manifold(model, 4)
    sol = res.solution
    # pure model: Y_x = -(1/4) u^4 exactly from the base steps
    assert sol.reduced.a_bar == pytest.approx(0.25)
    assert sol.reduced.b == pytest.approx(0.0, abs=1e-14)
    assert sol.coefficient_norm() < 1e-13


def test_skeleton_reduced_field_form():
    td = TorusData(omega0=(math.sqrt(2), math.sqrt(3)), n=2,
                   c2=np.array([[0.3, 0.1], [0.1, 0.2]]),
                   extra_tails=[["x", 6, [0, 0, 0, 0, 0], [0, 0], 0.05, 0.0]])
    model, _ = build_full_skeleton(td, degree=8)
    res = solve_manifold(model, 4)
    red = res.solution.reduced
    coeffs = red.x_poly_coeffs()
    assert set(coeffs) == {4, 7}
    assert coeffs[4] == pytest.approx(-0.25)


def test_torus_data_validation():
    with pytest.raises(InsufficientTorusData):
        TorusData(omega0=(1.0,), n=2).check()
    with pytest.raises(InsufficientTorusData):
        TorusData(omega0=(1.0, 2.0), n=2, c2=np.eye(3)).check()


# --------------------------------------------------------------- escape demo


def test_escape_demo_single_primary_fast():
    sys = PrimarySystem.single(mass=1.0)
    model, chart = build_restricted_field(sys, degree=8, gtilde0=0.15)
    res = solve_manifold(model, 4)
    rep, orbit = escape_demo(sys, res.solution, chart, x0=0.05, horizon=3.0e9,
                             n_samples=120)
    assert rep.law_ok, rep.law_ratio_range
    assert rep.y_ok and abs(rep.y_end) <= 1e-3
    assert rep.energy_ok and abs(rep.energy_end) <= 1e-4
    assert rep.control_law_fails
    assert rep.all_pass
    # the radial velocity decays trendwise along the escape
    ys = [s["y"] for s in rep.samples if s["t"] >= 1.0]
    assert ys[-1] < ys[0]


def test_escape_demo_off_manifold_control_is_distinct():
    sys = PrimarySystem.single(mass=1.0)
    model, chart = build_restricted_field(sys, degree=8, gtilde0=0.15)
    res = solve_manifold(model, 3)
    rep, _ = escape_demo(sys, res.solution, chart, x0=0.05, horizon=1.0e5,
                         n_samples=60)
    assert rep.control_law_fails
