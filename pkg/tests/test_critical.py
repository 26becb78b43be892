from __future__ import annotations

import numpy as np
import pytest

from blowup_lab.critical import (catalog, center_manifold_P0, center_manifold_P0_Wchart,
                                 center_manifold_P0_Y, find, p2_coords, p2_e3, p2_lambda3,
                                 point_P1gamma, residual_norm)
from blowup_lab.params import derive, validate
from blowup_lab.systems import FINITE, INF_Q1, PhaseState, vector_field

PS = validate((3, 2, 3, 0.2))
SAMPLES = [(3, 2, 3, 0.2), (3, 2, 3, 20), (2, 1.5, 1, -0.3), (4, 1, 2, 1.0), (1.5, 1.2, 5, 3.0),
           (5, 4.5, 3, -1.5)]


def test_p2_coordinates():
    assert p2_coords(PS) == pytest.approx((3 / 22, 3 / 22, 0.0), rel=1e-15)


def test_p2_lambda3_closed_form():
    # L / (2 phi) = (12/5) / (44/3)
    assert p2_lambda3(PS) == pytest.approx(9 / 55, rel=1e-14)
    J = find(PS, "P2").jacobian
    assert sorted(np.linalg.eigvals(J).real)[-1] == pytest.approx(9 / 55, rel=1e-12)


def test_p2_e3_direction():
    v = p2_e3(PS)
    ref = np.array([-8, -12.8, 87.36])
    assert np.allclose(v / np.linalg.norm(v), ref / np.linalg.norm(ref), atol=1e-14)


def test_p1_eigenvalues():
    lams = sorted(find(PS, "P1").eigenvalues)
    assert lams == pytest.approx(sorted([-10 / 11, 5 / 11, -5 / 11]))


def test_q5_coordinates_and_q1_spectrum():
    q5 = find(PS, "Q5")
    assert q5.chart == INF_Q1
    assert q5.coords == pytest.approx((-1 / 3, 0, 0))
    q1 = find(PS, "Q1")
    assert sorted(q1.eigenvalues) == pytest.approx(sorted([-1.0, 2.2, 2.0]))


def test_q5_merged_when_n_is_two():
    ids = [cp.id for cp in catalog(validate((3, 2, 2, 0.5)))]
    assert "Q5" not in ids
    assert find(validate((3, 2, 2, 0.5)), "Q1").flags["merged_with_Q5"]


def test_p_one_line_and_no_pgamma0():
    ps = validate((3, 1, 3, 0.5))
    pts = catalog(ps, gammas=(0.5, 2.0))
    ids = [cp.id for cp in pts]
    assert "Pgamma0" not in ids and ids.count("P1gamma") == 2
    for cp in pts:
        if cp.id == "P1gamma":
            assert np.max(np.abs(vector_field(ps, cp.state()))) == 0.0
    with pytest.raises(ValueError):
        point_P1gamma(PS, 1.0)


def test_q4_flag():
    assert find(PS, "Q4").flags["no_orbit_for_p_gt_1"]
    assert not find(validate((3, 1, 3, 0.5)), "Q4").flags["no_orbit_for_p_gt_1"]


@pytest.mark.parametrize("raw", SAMPLES)
def test_catalog_equilibria_and_eigenpairs(raw):
    ps = validate(raw)
    for cp in catalog(ps, gammas=(0.3,)):
        assert np.max(np.abs(vector_field(ps, cp.state()))) < 1e-12, cp.id
        assert residual_norm(ps, cp) < 1e-10, cp.id
        assert cp.stable_dim + cp.unstable_dim + cp.center_dim == 3


@pytest.mark.parametrize("raw", SAMPLES)
def test_p2_trace_determinant(raw):
    ps = validate(raw)
    d = derive(ps).as_float()
    m = ps.m
    cp = find(ps, "P2")
    l1, l2, l3 = cp.eigenvalues
    assert complex(l1 * l2).real == pytest.approx((m - 1) / (2 * d.alpha * d.phi), rel=1e-10)
    assert complex(l1 + l2).real < 0
    assert l3 > 0


@pytest.mark.parametrize("raw", [r for r in SAMPLES if r[1] > 1])
def test_p1_z_eigenvalue_negative(raw):
    ps = validate(raw)
    d = derive(ps).as_float()
    lam = find(ps, "P1").eigenvalues[2]
    assert lam == pytest.approx(-(ps.p - 1) * d.beta / d.alpha)
    assert lam < 0


def test_center_manifold_values():
    assert center_manifold_P0(PS, 0.0, 0.7) == 0.0
    # (α/β²)((N-2)β + mα) = 5.28 * 38/12 = 16.72
    assert center_manifold_P0(PS, 1e-3, 0.0) == pytest.approx(-1.672e-5, rel=1e-12)
    assert center_manifold_P0_Wchart(PS, 0.0, 0.0) == 0.0
    w = center_manifold_P0_Wchart(PS, 1e-3, 1e-3)
    assert w == pytest.approx(1e-3 - (5 / 11) * 1e-3 - 1.672e-5, rel=1e-12)
    assert center_manifold_P0_Wchart(PS, 1e-6, 0.0) == pytest.approx(1e-6, rel=1e-4)


def test_center_manifold_reduced_flow():
    # on the manifold, dX/dη = X² / β to leading order
    beta = 5 / 12
    errs = []
    for X in (1e-3, 1e-4, 1e-5):
        Y = center_manifold_P0_Y(PS, X, 0.0)
        dX = vector_field(PS, PhaseState(FINITE, (X, Y, 0.0)))[0]
        errs.append(abs(dX / (X * X / beta) - 1))
    assert errs[0] < 0.05
    assert errs[1] < errs[0] / 5 and errs[2] < errs[1] / 5
