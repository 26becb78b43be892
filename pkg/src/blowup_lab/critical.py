"""Equilibria of the phase space, their linearizations and manifold seeds."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .params import ParamSet, derive
from .systems import (FINITE, FINITE_W, INF_Q1, INF_Q2, INF_Q3, Chart, PhaseState,
                      jacobian, vector_field)

EIG_TOL = 1e-12


@dataclass
class CriticalPoint:
    """One equilibrium in its natural chart.

    ``eigenpairs`` lists (eigenvalue, unit eigenvector) with multiplicity.
    """

    id: str
    chart: Chart
    coords: tuple
    jacobian: np.ndarray
    eigenpairs: list
    stable_dim: int
    unstable_dim: int
    center_dim: int
    gamma: Optional[float] = None
    flags: dict = field(default_factory=dict)

    @property
    def eigenvalues(self) -> list:
        return [lam for lam, _ in self.eigenpairs]

    def state(self) -> PhaseState:
        return PhaseState(self.chart, self.coords)

    def to_json(self) -> dict:
        def enc(z):
            z = complex(z)
            return z.real if z.imag == 0 else {"re": z.real, "im": z.imag}

        return {
            "id": self.id,
            "chart": self.chart.id,
            "coords": list(self.coords),
            "gamma": self.gamma,
            "eigenvalues": [enc(lam) for lam, _ in self.eigenpairs],
            "eigenvectors": [[enc(c) for c in v] for _, v in self.eigenpairs],
            "stable_dim": self.stable_dim,
            "unstable_dim": self.unstable_dim,
            "center_dim": self.center_dim,
            "flags": self.flags,
        }


def _dims(eigenvalues) -> tuple[int, int, int]:
    st = sum(1 for v in eigenvalues if complex(v).real < -EIG_TOL)
    un = sum(1 for v in eigenvalues if complex(v).real > EIG_TOL)
    return st, un, len(eigenvalues) - st - un


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex if np.iscomplexobj(v) else float)
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


def numeric_eigenpairs(J: np.ndarray) -> list:
    """General fallback through LAPACK, for matrices without a closed form."""
    vals, vecs = np.linalg.eig(np.asarray(J, dtype=float))
    out = []
    for k in range(len(vals)):
        lam = vals[k]
        v = vecs[:, k]
        if abs(lam.imag) == 0 and np.all(np.abs(v.imag) == 0):
            lam, v = float(lam.real), v.real
        out.append((lam, _unit(v)))
    return out


def _upper_triangular_eigenpairs(J: np.ndarray) -> list:
    """Back substitution for an upper triangular 3x3 matrix."""
    n = 3
    lams = [float(J[k, k]) for k in range(n)]
    if len({round(v, 14) for v in lams}) < n:
        return numeric_eigenpairs(J)
    pairs = []
    for k, lam in enumerate(lams):
        v = np.zeros(n)
        v[k] = 1.0
        for i in range(k - 1, -1, -1):
            acc = sum(J[i, j] * v[j] for j in range(i + 1, k + 1))
            v[i] = acc / (lam - J[i, i])
        pairs.append((lam, _unit(v)))
    return pairs


def _make(ps, pid, chart, coords, pairs, gamma=None, flags=None) -> CriticalPoint:
    J = jacobian(ps, PhaseState(chart, coords))
    st, un, ce = _dims([lam for lam, _ in pairs])
    return CriticalPoint(pid, chart, tuple(float(c) for c in coords), J, pairs, st, un, ce,
                         gamma, dict(flags or {}))


def p2_coords(ps: ParamSet) -> tuple[float, float, float]:
    d = derive(ps)
    phi = float(d.phi)
    return ((float(ps.m) - 1) / (2 * phi), 1 / phi, 0.0)


def p2_e3(ps: ParamSet) -> np.ndarray:
    """Unnormalized eigenvector of P2 for the eigenvalue leaving the plane Z = 0."""
    m, p, N, s = ps.as_tuple()
    X = -(m - 1) ** 3
    Y = -(m - 1) * ((s + 2) * (m - 1) + 2 * (p - 1))
    Z = ((s + 2) ** 2 * (m - 1) ** 2 + (s + 2) * ((N - 2) * (m - 1) ** 2 + 4 * p * (m - 1))
         + 2 * N * (m - 1) ** 2 + 4 * (p - 1) ** 2 - 4 * (m - 2) * (p - 1))
    return np.array([X, Y, Z], dtype=float)


def p2_lambda3(ps: ParamSet) -> float:
    """Z-direction eigenvalue at P2, i.e. (p-1)Y(P2) + σX(P2) = L/(2φ)."""
    d = derive(ps)
    return float(d.L) / (2 * float(d.phi))


def point_P0(ps: ParamSet) -> CriticalPoint:
    d = derive(ps)
    ba = float(d.beta / d.alpha)
    pairs = [(0.0, _unit([ba, 1.0, 0.0])), (-ba, np.array([0.0, 1.0, 0.0])),
             (0.0, np.array([0.0, 0.0, 1.0]))]
    return _make(ps, "P0", FINITE, (0.0, 0.0, 0.0), pairs)


def point_P1(ps: ParamSet) -> CriticalPoint:
    d = derive(ps)
    m, p, N, _ = ps.as_tuple()
    ba = float(d.beta / d.alpha)
    pairs = [(-(m - 1) * ba, _unit([m * ba, -(1 + N * ba), 0.0])),
             (ba, np.array([0.0, 1.0, 0.0])),
             (-(p - 1) * ba, np.array([0.0, 0.0, 1.0]))]
    return _make(ps, "P1", FINITE, (0.0, -ba, 0.0), pairs)


def point_P1gamma(ps: ParamSet, gamma: float) -> CriticalPoint:
    """Point of the critical line {X = 0, Y = -β/α} that exists when p = 1."""
    if not ps.p_is_one:
        raise ValueError("the critical line exists only for p = 1")
    d = derive(ps)
    m, _, N, s = ps.as_tuple()
    ba = float(d.beta / d.alpha)
    v2 = -(1 + N * ba - gamma) / (m * ba)
    v3 = -s * gamma / ((m - 1) * ba)
    pairs = [(-(m - 1) * ba, _unit([1.0, v2, v3])), (ba, np.array([0.0, 1.0, 0.0])),
             (0.0, np.array([0.0, 0.0, 1.0]))]
    return _make(ps, "P1gamma", FINITE, (0.0, -ba, gamma), pairs, gamma=gamma)


def point_P2(ps: ParamSet) -> CriticalPoint:
    coords = p2_coords(ps)
    J = jacobian(ps, PhaseState(FINITE, coords))
    a11, a12, a21, a22 = J[0, 0], J[0, 1], J[1, 0], J[1, 1]
    tr, det = a11 + a22, a11 * a22 - a12 * a21
    disc = tr * tr - 4 * det
    root = math.sqrt(disc) if disc >= 0 else cmath.sqrt(disc)
    pairs = []
    for lam in ((tr - root) / 2, (tr + root) / 2):
        v = np.array([a12, lam - a11, 0.0], dtype=complex if isinstance(lam, complex) else float)
        pairs.append((lam, _unit(v)))
    pairs.append((p2_lambda3(ps), _unit(p2_e3(ps))))
    flags = {"focus": bool(disc < 0)}
    return _make(ps, "P2", FINITE, coords, pairs, flags=flags)


def point_Pgamma0(ps: ParamSet) -> CriticalPoint:
    if ps.p_is_one:
        raise ValueError("P_gamma0 exists only for p > 1")
    d = derive(ps)
    p = float(ps.p)
    ba = float(d.beta / d.alpha)
    g0 = float(d.gamma0)
    # σγ0 + (p-1)γ0(1-γ0)α/β vanishes identically, so the zero eigenvalue is semisimple.
    pairs = [(0.0, _unit([1.0, (1 - g0) / ba, 0.0])), (0.0, np.array([0.0, 0.0, 1.0])),
             (-ba, _unit([0.0, 1.0, -(p - 1) * g0 / ba]))]
    return _make(ps, "Pgamma0", FINITE, (0.0, 0.0, g0), pairs)


def point_Q1(ps: ParamSet) -> CriticalPoint:
    J = jacobian(ps, PhaseState(INF_Q1, (0.0, 0.0, 0.0)))
    flags = {"merged_with_Q5": ps.N == 2}
    return _make(ps, "Q1", INF_Q1, (0.0, 0.0, 0.0), _upper_triangular_eigenpairs(J), flags=flags)


def point_Q5(ps: ParamSet) -> CriticalPoint:
    m = float(ps.m)
    coords = (-(ps.N - 2) / m, 0.0, 0.0)
    J = jacobian(ps, PhaseState(INF_Q1, coords))
    return _make(ps, "Q5", INF_Q1, coords, _upper_triangular_eigenpairs(J))


def point_Q2(ps: ParamSet) -> CriticalPoint:
    J = jacobian(ps, PhaseState(INF_Q2, (0.0, 0.0, 0.0)))
    pairs = [(float(J[k, k]), np.eye(3)[k]) for k in range(3)]
    return _make(ps, "Q2", INF_Q2, (0.0, 0.0, 0.0), pairs)


def point_Q3(ps: ParamSet) -> CriticalPoint:
    J = jacobian(ps, PhaseState(INF_Q3, (0.0, 0.0, 0.0)))
    pairs = [(float(J[k, k]), np.eye(3)[k]) for k in range(3)]
    return _make(ps, "Q3", INF_Q3, (0.0, 0.0, 0.0), pairs)


def point_Q4(ps: ParamSet) -> CriticalPoint:
    """Q4 (Z → ∞ with X, Y bounded) seen at the origin of the W = XZ chart.

    P0 also maps to that origin; the two are told apart by Z = W/X.
    """
    J = jacobian(ps, PhaseState(FINITE_W, (0.0, 0.0, 0.0)))
    d = derive(ps)
    ba = float(d.beta / d.alpha)
    pairs = [(0.0, _unit([ba, 1.0, 0.0])), (-ba, np.array([0.0, 1.0, 0.0])),
             (0.0, _unit([0.0, -1.0, ba]))]
    flags = {"no_orbit_for_p_gt_1": not ps.p_is_one}
    return _make(ps, "Q4", FINITE_W, (0.0, 0.0, 0.0), pairs, flags=flags)


def catalog(ps: ParamSet, gammas: tuple = ()) -> list[CriticalPoint]:
    """Every equilibrium for ``ps``.

    For p = 1 the point P1 widens into a line; it is sampled at ``gammas``
    (P1 itself is the γ = 0 member and is always listed).
    """
    pts = [point_P0(ps), point_P1(ps)]
    if ps.p_is_one:
        pts.extend(point_P1gamma(ps, float(g)) for g in gammas)
    pts.append(point_P2(ps))
    if not ps.p_is_one:
        pts.append(point_Pgamma0(ps))
    pts.extend([point_Q1(ps), point_Q2(ps), point_Q3(ps), point_Q4(ps)])
    if ps.N != 2:
        q5 = point_Q5(ps)
        if ps.N == 1:
            q5.flags["dimension_one"] = True
        pts.append(q5)
    return pts


def find(ps: ParamSet, pid: str) -> CriticalPoint:
    for cp in catalog(ps):
        if cp.id == pid:
            return cp
    raise KeyError(pid)


def center_manifold_P0(ps: ParamSet, X: float, Z: float) -> float:
    """Quadratic truncation U(X, Z) of the center manifold at P0, with U = (β/α)Y − X."""
    d = derive(ps)
    a, b = float(d.alpha), float(d.beta)
    m, _, N, _ = ps.as_tuple()
    return -(a / b ** 2) * ((N - 2) * b + a * m) * X * X - X * Z


def center_manifold_P0_Y(ps: ParamSet, X: float, Z: float) -> float:
    d = derive(ps)
    a, b = float(d.alpha), float(d.beta)
    return (a / b) * (center_manifold_P0(ps, X, Z) + X)


def center_manifold_P0_Wchart(ps: ParamSet, X: float, Y: float) -> float:
    """The same manifold written as W0(X, Y) in the W = XZ chart."""
    d = derive(ps)
    a, b = float(d.alpha), float(d.beta)
    m, _, N, _ = ps.as_tuple()
    return X - (b / a) * Y - (a / b ** 2) * ((N - 2) * b + m * a) * X * X


def residual_norm(ps: ParamSet, cp: CriticalPoint) -> float:
    return float(np.linalg.norm(vector_field(ps, cp.state())))
