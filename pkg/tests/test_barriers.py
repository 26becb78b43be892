from __future__ import annotations

import numpy as np
import pytest

from blowup_lab.barriers import (BARRIER_IDS, SIGN_POLYNOMIALS, certify_sign, consts, consts_of,
                                 eigvec_entry_test, flow_through, flow_value, get, region_membership,
                                 roof_roots, sample_on_barrier, sigma_s_estimate, surface_w)
from blowup_lab.errors import OffBarrier, RangeViolation
from blowup_lab.params import derive, pc_of, validate
from blowup_lab.systems import FINITE, PhaseState

PS = validate((3, 2, 3, 0.2))

# a parameter point inside each barrier's intended regime
REGIME = {
    "R1_walls": (3, 2, 3, 0.2),
    "RoofPlane": (3, 2, 3, 0.2),
    "Surface_k1": (3, 2, 3, 0.2),
    "VPlane_k1": (3, 2, 3, 0.2),
    "SurfaceW": (3, 2.5, 3, -0.5),
    "SurfaceW_N1": (3, 2, 1, -0.3),
    "PlaneYZ": (3, 2, 3, 100),
    "PlaneXY": (3, 2, 3, 20),
    "NoReturnPlane": (3, 2, 3, 0.2),
    "CylinderQ1": (3, 2, 3, 0.2),
}


def test_registry_complete():
    assert set(REGIME) == set(BARRIER_IDS)


def test_roof_roots_example():
    C = consts(3, 2.2, 3, -1.0)
    z1, z2 = roof_roots(C)
    assert z1 == pytest.approx(2 / 3)
    assert z2 == pytest.approx(1.030303, rel=1e-6)
    assert pc_of(3, 3, -1.0) == pytest.approx(2.5)
    assert z1 <= z2
    z1, z2 = roof_roots(consts(3, 2.8, 3, -1.0))
    assert z1 > z2


@pytest.mark.parametrize("bid", BARRIER_IDS)
def test_closed_form_matches_numeric_normal(bid):
    ps = validate(REGIME[bid])
    bar = get(bid)
    rng = np.random.default_rng(1)
    C = consts_of(ps)
    for face in bar.faces:
        for coords in sample_on_barrier(ps, bid, 200, rng, face.name):
            assert abs(face.g(*coords, C)) < 1e-12 * max(1.0, max(abs(c) for c in coords))
            fv = flow_value(ps, bid, PhaseState(face.chart, coords))
            assert fv.rel_diff < 1e-8


def test_off_barrier_rejected():
    with pytest.raises(OffBarrier):
        flow_through(PS, "NoReturnPlane", PhaseState(FINITE, (0.1, 0.0, 0.5)))


def test_n1_surface_needs_dimension_one():
    with pytest.raises(RangeViolation):
        certify_sign(PS, "SurfaceW_N1", grid=8)


def test_no_return_endpoints_negative():
    C = consts_of(PS)
    for X, Z in ((0.0, 0.0), (0.0, 1.0), (0.0, 5.0), (C.XP2, 1e-3), (C.XP2, 1.0), (C.XP2, 5.0)):
        assert flow_through(PS, "NoReturnPlane", PhaseState(FINITE, (X, -C.Y0, Z))) < 0


@pytest.mark.parametrize("raw", [(3, 2, 3, 0.2), (2, 1.5, 1, -0.3), (5, 1, 4, 7.0)])
def test_no_return_vanishes_at_corner(raw):
    # (2β + 1)/α = m - 1 makes the flow zero where Y = -Y0 meets X = X(P2), Z = 0
    ps = validate(raw)
    C = consts_of(ps)
    assert flow_through(ps, "NoReturnPlane", PhaseState(FINITE, (C.XP2, -C.Y0, 0.0))) == pytest.approx(0, abs=1e-14)


@pytest.mark.parametrize("raw", [(3, 2.5, 3, -0.5), (4, 3.5, 3, -1.0), (2, 1.9, 2, -0.2)])
def test_surface_w_positive_at_p2(raw):
    ps = validate(raw)
    assert ps.p > derive(ps).pc and ps.sigma <= 0
    C = consts_of(ps)
    W = surface_w(C.XP2, C.YP2, C)
    assert flow_through(ps, "SurfaceW", (C.XP2, C.YP2, W)) > 0


@pytest.mark.parametrize("bid", BARRIER_IDS)
def test_grid_certificates_in_regime(bid):
    grid = 200 if bid == "SurfaceW" else 48
    rep = certify_sign(validate(REGIME[bid]), bid, grid=grid)
    assert rep.verdict == "certified_sign", rep.witness
    assert rep.hypothesis_holds
    assert rep.max_rel_diff < 1e-8


def test_surface_w_outside_hypothesis_is_reported():
    rep = certify_sign(validate((3, 2.5, 3, 0.5)), "SurfaceW", grid=64)
    assert rep.hypothesis_holds is False
    assert rep.verdict in ("certified_sign", "violated")


def test_plane_yz_violated_at_sigma_20_with_witness():
    rep = certify_sign(validate((3, 2, 3, 20)), "PlaneYZ", grid=32)
    assert rep.verdict == "violated"
    w = rep.witness
    fv = flow_value(validate((3, 2, 3, 20)), "PlaneYZ", PhaseState(FINITE, w["coords"]))
    assert fv.closed_form < 0


def test_box_grid_mode():
    box = {"m": [2.5, 3.5], "p": [2.0, 2.2], "N": 3, "sigma": [0.1, 0.3]}
    rep = certify_sign(box, "NoReturnPlane", grid=16, param_samples=2)
    assert rep.certified and rep.box is not None


def test_interval_mode_certifies_on_sub_box():
    rep = certify_sign(validate((3, 2, 3, 20)), "NoReturnPlane", mode="interval", max_boxes=4000,
                       state_box=((0.0, 0.9), (0.0, 1.0)))
    assert rep.verdict == "certified_sign"
    assert rep.max_value < 0


def test_interval_mode_budget_is_inconclusive_not_violated():
    rep = certify_sign(validate((3, 2.5, 3, -0.5)), "SurfaceW", mode="interval", max_boxes=200)
    assert rep.verdict in ("certified_sign", "inconclusive")


def test_unknown_mode():
    with pytest.raises(ValueError):
        certify_sign(PS, "NoReturnPlane", mode="fuzzy")


def test_region_membership_examples():
    C = consts_of(PS)
    at_p2 = region_membership(PS, (C.XP2, C.YP2, 0.0))
    assert at_p2["R1"] == "boundary" and at_p2["D"] == "boundary"
    assert region_membership(PS, (0.0, 0.0, 0.0))["R1"] == "inside"
    assert region_membership(PS, (0.01, 0.01, 0.0))["R1"] == "inside"
    assert surface_w(C.XP2, C.YP2, C) > 0


def test_eigvec_entry_products():
    small = eigvec_entry_test(PS)
    assert not small.enters
    mid = eigvec_entry_test(validate((3, 2, 3, 20)))
    assert mid.plane_xy == pytest.approx(-3.6190476, rel=1e-7)
    assert mid.plane_yz == pytest.approx(-3488.0, rel=1e-10)
    big = eigvec_entry_test(validate((3, 2, 3, 100)))
    assert big.enters
    for e in (small, mid, big):
        assert e.plane_xy == pytest.approx(e.closed_xy, rel=1e-8)
        assert e.plane_yz == pytest.approx(e.closed_yz, rel=1e-8)


def test_k1_constant_and_vertical_plane():
    C = consts_of(PS)
    d = derive(PS).as_float()
    assert C.k1 == pytest.approx(d.beta / (2 * d.alpha), rel=1e-15)
    rng = np.random.default_rng(4)
    for coords in sample_on_barrier(PS, "VPlane_k1", 100, rng):
        assert flow_through(PS, "VPlane_k1", coords) > 0


def test_sigma_s_estimate():
    est = sigma_s_estimate(3, 2, 3)
    assert 0 < est["sigma_s"] < est["rhs_at_0"]
    C = consts(3, 2, 3, est["sigma_s"])
    assert est["sigma_s"] == pytest.approx(2 * C.b ** 2 / (4 * C.a ** 2 * C.XP2 + C.b ** 2), rel=1e-10)


def _domain_sample(rng, where):
    while True:
        m = rng.uniform(1.01, 8.0)
        N = int(rng.integers(1, 10))
        s = rng.uniform(-2.0, 0.0)
        if ("N >= 2" in where and N < 2) or ("N >= 3" in where and N < 3) or ("N >= 5" in where and N < 5):
            continue
        if "N in {3, 4}" in where and N not in (3, 4):
            continue
        if ("m >= 3" in where and m < 3) or ("m <= 3" in where and m > 3):
            continue
        if N + s <= 0:
            continue
        p = rng.uniform(pc_of(m, N, s), m)
        if s > -2 * (p - 1) / (m - 1):
            return {"m": m, "p": p, "N": N, "sigma": s}


@pytest.mark.parametrize("name", sorted(SIGN_POLYNOMIALS))
def test_sign_polynomials_on_their_domain(name):
    sp = SIGN_POLYNOMIALS[name]
    rng = np.random.default_rng(abs(hash(name)) % 2 ** 32)
    for _ in range(2000):
        v = _domain_sample(rng, sp.where)
        assert np.sign(sp.fn(*(v[a] for a in sp.args))) == sp.expected_sign, v
