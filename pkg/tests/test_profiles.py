from __future__ import annotations

import math

import numpy as np
import pytest

from _profile_runs import curve
from blowup_lab.errors import NoModelFits, OutOfRange, ReconstructFailed
from blowup_lab.params import derive, validate
from blowup_lab.profiles import (BehaviorKind, derivative_consistency, evaluate_solution, fit_behavior,
                                 interface_from_constant, interface_from_gamma, interface_point,
                                 ode_residual, phase_from_profile, reconstruct_xyz, values_at_zero)

PS = validate((3, 2, 3, 0.2))
ALPHA, BETA = 11 / 12, 5 / 12


def synthetic(ps, xi, f, fprime):
    return reconstruct_xyz(ps, np.column_stack(phase_from_profile(ps, xi, f, fprime)))


@pytest.mark.parametrize("raw", [(3, 2, 3, 0.2), (2, 1.5, 1, -0.3), (4, 1, 2, 2.0)])
@pytest.mark.parametrize("q", [0.5, 1.0, 2.2])
def test_round_trip_power_profiles(raw, q):
    ps = validate(raw)
    xi = np.geomspace(1e-3, 1e3, 200)
    c = synthetic(ps, xi, xi ** q, q * xi ** (q - 1))
    assert np.allclose(c.xi, xi, rtol=1e-8, atol=0)
    assert np.allclose(c.f, xi ** q, rtol=1e-8, atol=0)
    assert np.allclose(c.fprime, q * xi ** (q - 1), rtol=1e-8, atol=0)


def test_reconstruct_needs_positive_samples():
    with pytest.raises(ReconstructFailed):
        reconstruct_xyz(PS, [[0.0, 0.1, 0.2], [0.1, 0.1, 0.0], [0.2, 0.0, 0.3]])


def test_window_too_small():
    xi = np.geomspace(1e-2, 1, 10)
    c = synthetic(PS, xi, xi, np.ones_like(xi))
    with pytest.raises(NoModelFits):
        fit_behavior(c, "xi_to_0")


def test_window_too_narrow():
    xi = np.linspace(0.01, 0.011, 50)
    c = synthetic(PS, xi, xi, np.ones_like(xi))
    with pytest.raises(NoModelFits):
        fit_behavior(c, "xi_to_0")


def test_synthetic_p2_type():
    K = 0.204124
    xi = np.geomspace(1e-4, 1e-2, 100)
    fit = fit_behavior(synthetic(PS, xi, K * xi, K * np.ones_like(xi)), "xi_to_0")
    assert fit.kind is BehaviorKind.P2_TYPE
    assert fit.constants["K"] == pytest.approx(K, rel=1e-10)
    assert values_at_zero(PS, fit) == {"f0": 0.0, "dfm0": 0.0, "good": True}


def test_synthetic_tail():
    xi = np.geomspace(10, 1e4, 100)
    fit = fit_behavior(synthetic(PS, xi, xi ** -0.2, -0.2 * xi ** -1.2), "xi_to_inf")
    assert fit.kind is BehaviorKind.TAIL_GAMMA0
    assert fit.constants["K"] == pytest.approx(1.0, rel=1e-10)
    assert fit.exponent == pytest.approx(-0.2, rel=1e-10)


def test_synthetic_q1():
    K = 0.7
    c2 = ALPHA * 2 / (2 * 3 * 3)
    c3 = -2 * K ** 0.5 / (3 * 3.2 * 2.2)
    xi = np.geomspace(1e-3, 1e-2, 100)
    g = K + c2 * xi ** 2 + c3 * xi ** 2.2
    dg = 2 * c2 * xi + 2.2 * c3 * xi ** 1.2
    f = np.sqrt(g)
    fit = fit_behavior(synthetic(PS, xi, f, dg / (2 * f)), "xi_to_0")
    assert fit.kind is BehaviorKind.Q1_POSITIVE
    assert fit.constants["f0"] == pytest.approx(math.sqrt(K), rel=1e-8)
    assert fit.constants["c2_pinned"] == pytest.approx(c2, rel=1e-6)
    assert fit.expected["c2"] == pytest.approx(c2)
    assert values_at_zero(PS, fit)["good"]


def test_synthetic_interface():
    c = -BETA * 2 / 6
    C = 0.25
    xi0 = math.sqrt(-C / c)
    xi = np.linspace(0.5 * xi0, xi0 * (1 - 1e-6), 400)
    g = C + c * xi ** 2
    f = np.sqrt(g)
    fit = fit_behavior(synthetic(PS, xi, f, c * xi / f), "interface")
    assert fit.kind is BehaviorKind.INTERFACE
    assert fit.constants["c"] == pytest.approx(c, rel=1e-6)
    assert interface_point(synthetic(PS, xi, f, c * xi / f)) == pytest.approx(1.341641, rel=1e-6)


def test_interface_constants():
    assert interface_from_constant(PS, BETA * 2 / 6) == pytest.approx(1.0)
    assert interface_from_constant(PS, 0.25) == pytest.approx(math.sqrt(1.8))
    ps = validate((3, 1, 3, 0.5))
    a = float(derive(ps).alpha)
    assert interface_from_gamma(ps, 2.0) == pytest.approx((2 * a) ** 2)


def test_evaluate_solution_inside_and_errors():
    xi = np.geomspace(1e-3, 1e1, 300)
    c = synthetic(PS, xi, xi ** 2.2, 2.2 * xi ** 1.2)
    u = evaluate_solution(PS, c, 0.5, 0.0, 1.0)
    assert u == pytest.approx(0.5 ** 2.2, rel=1e-6)
    with pytest.raises(OutOfRange):
        evaluate_solution(PS, c, 0.5, 1.0, 1.0)
    with pytest.raises(OutOfRange):
        evaluate_solution(PS, c, 1e6, 0.0, 1.0)


def test_global_blowup_rate_at_origin():
    K = 0.7
    xi = np.geomspace(1e-3, 1e-2, 100)
    g = K + 0.1 * xi ** 2
    f = np.sqrt(g)
    c = synthetic(PS, xi, f, 0.1 * xi / f)
    fit = fit_behavior(c, "xi_to_0")
    for tau in (1e-2, 1e-4, 1e-6):
        u = evaluate_solution(PS, c, 0.0, 1.0 - tau, 1.0, fits=[fit])
        assert u * tau ** ALPHA == pytest.approx(math.sqrt(K), rel=1e-6)


def test_p0_type_bounded_at_fixed_x():
    xi = np.geomspace(1e-3, 1e1, 100)
    c = synthetic(PS, xi, 0.3 * xi ** 2.2, 0.66 * xi ** 1.2)
    fit = fit_behavior(c, "xi_to_0")
    assert fit.kind is BehaviorKind.P0_TYPE
    vals = [evaluate_solution(PS, c, 2.0, 1.0 - tau, 1.0, fits=[fit]) for tau in (1e-1, 1e-3, 1e-6)]
    assert vals == pytest.approx([0.3 * 2 ** 2.2] * 3, rel=1e-6)


def test_p2_type_vanishes_at_origin():
    xi = np.geomspace(1e-4, 1e-2, 100)
    c = synthetic(PS, xi, 0.2 * xi, 0.2 * np.ones_like(xi))
    fit = fit_behavior(c, "xi_to_0")
    assert evaluate_solution(PS, c, 0.0, 0.5, 1.0, fits=[fit]) == 0.0
    # u = K|x| τ^(β-α) with α - β = 1/(m-1)
    for x, tau in ((1e-3, 1e-3), (1e-2, 1e-6)):
        u = evaluate_solution(PS, c, x, 1.0 - tau, 1.0, fits=[fit])
        assert u == pytest.approx(0.2 * x * tau ** (-0.5), rel=1e-6)


# orbits at (3, 2, 3, 0.2)


def test_p2_orbit_profile():
    _, c = curve("P2")
    fit = fit_behavior(c, "xi_to_0")
    assert fit.kind is BehaviorKind.P2_TYPE
    assert fit.constants["K"] == pytest.approx(0.204124, rel=1e-2)
    assert fit.exponent == pytest.approx(1.0, rel=1e-2)


def test_p0_orbit_profile():
    _, c = curve("P0")
    fit = fit_behavior(c, "xi_to_0")
    assert fit.kind is BehaviorKind.P0_TYPE
    assert fit.exponent == pytest.approx(2.2, rel=1e-2)


def test_q1_orbit_profile():
    _, c = curve("Q1")
    fit = fit_behavior(c, "xi_to_0")
    assert fit.kind is BehaviorKind.Q1_POSITIVE
    assert fit.constants["f0"] > 0
    assert fit.constants["c2_pinned"] == pytest.approx(fit.expected["c2"], rel=1e-2)


def test_tail_profile():
    orbit, c = curve("tail")
    assert orbit.fate.kind.value == "Enters_Pgamma0"
    fit = fit_behavior(c, "xi_to_inf")
    assert fit.kind is BehaviorKind.TAIL_GAMMA0
    assert fit.exponent == pytest.approx(-0.2, rel=1e-2)
    assert fit.constants["K"] == pytest.approx(1.0, rel=1e-2)


@pytest.mark.parametrize("theta", [0.5, 1.0])
def test_interface_profile(theta):
    _, c = curve("interface", arg=theta)
    fit = fit_behavior(c, "interface")
    assert fit.constants["c"] == pytest.approx(-BETA / 3, rel=1e-2)
    assert fit.constants["c_limit_from_Y"] == pytest.approx(-BETA / 3, rel=1e-3)
    assert interface_point(c, fit) == pytest.approx(fit.constants["xi0_extrapolated"], rel=1e-2)


@pytest.mark.parametrize("kind", ["P2", "P0", "Q1", "tail", "interface"])
def test_residual_and_round_trip_on_orbits(kind):
    _, c = curve(kind, arg=0.5 if kind == "interface" else 1.0)
    assert np.max(ode_residual(c)) < 1e-6
    back = np.column_stack(phase_from_profile(PS, c.xi, c.f, c.fprime))
    assert np.allclose(back, c.xyz, rtol=1e-8, atol=0)
    assert np.all(np.diff(c.xi) > 0) and np.all(c.f >= 0)


def test_derivative_consistency_on_smooth_orbit():
    _, c = curve("Q1")
    assert derivative_consistency(c) < 1e-3
