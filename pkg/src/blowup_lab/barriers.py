"""Barrier surfaces of the phase space and sign certificates for the flow across them.

Every barrier is described by one or more faces.  A face knows its chart,
a parameterization of its admissible portion by the unit square, the
defining function g, a normal vector and a closed-form polynomial for the
flow normal·field.  The same arithmetic serves floats, numpy arrays and
:mod:`mpmath` intervals, so the closed forms feed both the grid check and the
branch-and-bound interval check.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from types import SimpleNamespace
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from mpmath import iv
from scipy.optimize import brentq

from .errors import ClosedFormMismatch, OffBarrier, RangeViolation
from .params import ParamSet, validate
from .systems import (FINITE, FINITE_W, INF_Q1, Chart, PhaseState, field_function,
                      jacobian, transform)

G_TOL = 1e-10
AGREE_TOL = 1e-8
DEFAULT_GRID = 256
MAX_BOXES = 2 ** 20
Z_MAX = 10.0

BARRIER_IDS = ("R1_walls", "RoofPlane", "Surface_k1", "VPlane_k1", "SurfaceW", "SurfaceW_N1",
               "PlaneYZ", "PlaneXY", "NoReturnPlane", "CylinderQ1")


# ----------------------------------------------------------------- arithmetic


def _is_iv(x) -> bool:
    return type(x).__name__ == "ivmpf"


def _max0(x):
    if _is_iv(x):
        return iv.mpf([max(0.0, float(x.a)), max(0.0, float(x.b))])
    if isinstance(x, np.ndarray):
        return np.maximum(x, 0.0)
    return max(x, 0.0)


def _lo(x) -> float:
    return float(x.a) if _is_iv(x) else float(x)


def _hi(x) -> float:
    return float(x.b) if _is_iv(x) else float(x)


def consts(m, p, N, s) -> SimpleNamespace:
    """Constants shared by the barrier formulas, in whatever arithmetic the inputs use."""
    L = s * (m - 1) + 2 * (p - 1)
    a = (s + 2) / L
    b = (m - p) / L
    ba = (m - p) / (s + 2)
    ph = m * N - N + 2
    XP2 = (m - 1) / (2 * a * ph)
    YP2 = 1 / (a * ph)
    Y0 = (m - 1) / 2
    k1 = ba / 2
    den = 2 * (m - 1) ** 2 * N ** 2 + 7 * (m - 1) * N + 2 * (m + 3)
    B = m * (m - 1) / den
    Cc = (2 * m * N - 2 * N + 3) * (m - 1) * L / (2 * (s + 2) * den)
    D = 2 * ph ** 2 / (m - 1)
    E = 2 * ph / (a * (m - 1))
    return SimpleNamespace(m=m, p=p, N=N, s=s, L=L, a=a, b=b, ba=ba, ph=ph, XP2=XP2, YP2=YP2,
                           Y0=Y0, k1=k1, den=den, B=B, C=Cc, D=D, E=E, z_max=Z_MAX)


def consts_of(ps: ParamSet) -> SimpleNamespace:
    return consts(*ps.as_tuple())


# ------------------------------------------------------------ surface heights


def surface_w(X, Y, C):
    """Height W = S(X, Y) of the quadratic surface used for σ ≤ 0, N ≥ 2."""
    m, N, s = C.m, C.N, C.s
    return ((-N - s / 2 + 1) * X * Y - m * Y ** 2 - (2 * N + s - 2) * (s + 2) / (8 * m) * X ** 2
            + 2 * m / (m + 1) * X)


def _surface_w_grad(X, Y, C):
    m, N, s = C.m, C.N, C.s
    return ((-N - s / 2 + 1) * Y - (2 * N + s - 2) * (s + 2) / (4 * m) * X + 2 * m / (m + 1),
            (-N - s / 2 + 1) * X - 2 * m * Y)


def surface_w_n1(X, Y, C):
    """Height of the replacement surface used in dimension one."""
    m, p, s = C.m, C.p, C.s
    q = 3 * m + p
    return (-(m + p) * s * (2 * m * s + q) / (2 * m * q ** 2) * X ** 2 - (m + p) * s / q * X * Y
            - (m + p) / 2 * Y ** 2 + 2 * (m + p) * ((m + p) * s + q) / ((m + 1) * q * (s + 2)) * X)


def _surface_w_n1_grad(X, Y, C):
    m, p, s = C.m, C.p, C.s
    q = 3 * m + p
    return (-(m + p) * s * (2 * m * s + q) / (m * q ** 2) * X - (m + p) * s / q * Y
            + 2 * (m + p) * ((m + p) * s + q) / ((m + 1) * q * (s + 2)),
            -(m + p) * s / q * X - (m + p) * Y)


def cylinder_w(y, C):
    """w on the cylinder through Q1 and P2 in the (y, z, w) chart."""
    return ((C.N - 2) * y + C.m * y ** 2) / (1 - C.ba * y)


# --------------------------------------------------------------- closed forms


def roof_roots(C) -> tuple:
    N, s, m, p = C.N, C.s, C.m, C.p
    return (N + s) / N, (N + s) * (N * (m - p) + s + 2) / (N * p * (s + 2))


def _cf_r1_x(X, Y, Z, C):
    return (C.m - 1) * X * (Y - C.YP2)


def _cf_r1_y(X, Y, Z, C):
    return (1 - C.N * C.YP2) * (X - C.XP2) - X * Z


def _cf_roof(X, Y, Z, C):
    Z1, Z2 = roof_roots(C)
    return -C.p * (Z - Z1) * (Z - Z2) / (C.N + C.s) ** 2


def _cf_k1(X, Y, Z, C):
    s, p, m, k2 = C.s, C.p, C.m, C.k1 ** 2
    return (s * X + (s - 2) * k2) * X + ((p - 1) * X + (m + p - 2) * k2) * Y


def _cf_vplane(X, Y, Z, C):
    return -X * (Z - 1) + C.k1 ** 2 + C.N * C.k1 * X


def _cf_surface_w(X, Y, W, C):
    m, p, N, s = C.m, C.p, C.N, C.s
    return (-m * (m - p) * Y ** 3 - (m - p) * (2 * N + s - 2) * X * Y ** 2 / 2
            + 2 * m * (m - p) / (s + 2) * Y ** 2
            - (m - p) * (s + 2) * (2 * N + s - 2) / (8 * m) * X ** 2 * Y
            + (m - p) * (2 * m * N + 2 * N + 5 * m * s + 6 * m + s - 2) / (2 * (s + 2) * (m + 1)) * X * Y
            - (2 * N + s - 2) * (s + 2) * (2 * N - s - 6) / (16 * m) * X ** 3
            + (2 * (N - 1) * (m - 1) - (3 * m + 1) * s) / (2 * (m + 1)) * X ** 2)


def _cf_surface_w_n1(X, Y, W, C):
    m, p, s = C.m, C.p, C.s
    q = 3 * m + p
    bracket = ((2 * m * s + q) * (m * s + q) / (m * q) * X
               - ((7 * m ** 2 + 5 * m * p + 3 * m + p) * s + 2 * (3 * m + 1) * q) / ((m + 1) * (s + 2)))
    return (m + p) * (m - p) / (s + 2) * Y ** 2 + (m + p) * s / q ** 2 * X ** 2 * bracket


def plane_yz_L(C):
    m, p, N, s = C.m, C.p, C.N, C.s
    return (-(m - 1) ** 2 * s ** 2
            + (2 * (m - 1) ** 3 * N ** 2 + 7 * (m - 1) ** 2 * N - 2 * (p - 4) * (m - 1)) * s
            + 4 * (m - 1) ** 2 * (p - 1) * N ** 2 - 2 * (m - 1) * (m - 8 * p + 7) * N - 4 * m + 16 * p - 12)


def _cf_plane_yz(X, Y, Z, C):
    m, p, N, s, ph = C.m, C.p, C.N, C.s, C.ph
    lin = -(p - 1) * (m - 1) * s + (m - 1) * (m - p) * N - 2 * p ** 2 + 2 * m + 2 * p - 2
    return (-2 * ph ** 2 * p / (m - 1) * Y ** 2 - 2 * ph * lin / ((m - 1) * (s + 2)) * Y
            + 2 * ph ** 2 * (2 * (m - 1) ** 2 * N ** 2 + 7 * (m - 1) * N + 8 - (m - 1) * s) / (m - 1) ** 2 * X * Y
            - 2 * ph * plane_yz_L(C) / ((m - 1) ** 2 * (s + 2)) * X)


def plane_xy_terms(C) -> tuple:
    """H1 as (slope, intercept) in Y, then H2, H3, H4 of the flow across X = BY + C."""
    m, p, N, s, L, ph = C.m, C.p, C.N, C.s, C.L, C.ph
    h1 = (2 * m ** 2 * (s + 2) ** 2 * (m - 1), m * (m - 1) * (s + 2) * (2 * m * N - 2 * N + 3) * L)
    h2 = 4 * m ** 2 * (s + 2) ** 2 * ph ** 2
    h3 = ((4 * (m - 1) ** 4 * N ** 2 + 2 * (m - 1) ** 2 * (7 * m - 6) * N - (2 * m - 3) ** 2 * (m - 1)) * s
          + 8 * (m - 1) ** 3 * (p - 1) * N ** 2 + 4 * (m - 1) ** 2 * (m + 6 * p - 6) * N
          - 8 * m ** 2 * p + 14 * m ** 2 + 18 * m * p - 24 * m - 18 * p + 18)
    h4 = ((2 * m * N - 2 * N + 3) * (m - 1) * L
          * ((2 * (m - 1) ** 2 * N + 4 * m - 3) * s + 4 * (p - 1) * (m - 1) * N + 2 * m + 6 * (p - 1)))
    return h1, h2, h3, h4


def _cf_plane_xy(X, Y, Z, C):
    (a1, b1), h2, h3, h4 = plane_xy_terms(C)
    num = (a1 * Y + b1) * Z + h2 * Y ** 2 + (C.s + 2) * C.ph * h3 * Y - h4
    return (C.m - 1) * num / (2 * (C.s + 2) ** 2 * C.den ** 2)


def _cf_no_return(X, Y, Z, C):
    return C.ph * X / 2 - (C.m - 1) * C.L / (4 * (C.s + 2)) - X * Z


def _cf_cylinder(y, z, w, C):
    m, ba = C.m, C.ba
    return z * (C.N - 2 + 2 * m * y + ba * w) + (1 - ba * y) * w * (2 - (m - 1) * y)


# ---------------------------------------------------------------- barrier model


@dataclass(frozen=True)
class Face:
    """One smooth piece of a barrier.

    ``embed`` maps the unit square onto the admissible portion of the face;
    ``mask`` (if given) must be positive at admissible points.
    """

    name: str
    chart: Chart
    g: Callable
    normal: Callable
    closed_form: Callable
    embed: Callable
    mask: Optional[Callable] = None


@dataclass(frozen=True)
class Barrier:
    id: str
    faces: tuple
    sign: int
    region: str
    hypothesis: Callable = field(default=lambda C: True)
    requires_n1: bool = False

    def check(self, ps: ParamSet) -> None:
        if self.requires_n1 and ps.N != 1:
            raise RangeViolation("N_sigma", f"{self.id} is defined for N = 1 only, got N = {ps.N}")

    def face(self, name: str | None = None) -> Face:
        if name is None:
            return self.faces[0]
        for f in self.faces:
            if f.name == name:
                return f
        raise KeyError(name)


def _ys(u, C):
    return -C.Y0 + u * (C.YP2 + C.Y0)


def _embed_r1_x(u, v, C):
    return C.XP2, _ys(u, C), v * C.z_max


def _embed_r1_y(u, v, C):
    return u * C.XP2, C.YP2, v * C.z_max


def _embed_roof(u, v, C):
    Z = v * (C.N + C.s) / C.N
    return u * C.XP2, 1 / C.N - Z / (C.N + C.s), Z


def _embed_k1(u, v, C):
    X = u * C.XP2
    return X, -C.k1 + v * C.k1, 1 + C.k1 ** 2 / X


def _embed_vplane(u, v, C):
    return u * C.XP2, -C.k1, v * C.z_max


def _embed_surface(height):
    def embed(u, v, C):
        X, Y = u * C.XP2, _ys(v, C)
        return X, Y, height(X, Y, C)
    return embed


def _embed_plane_yz(u, v, C):
    Y = _ys(u, C)
    lo = _max0(C.B * Y + C.C)
    return lo + v * (C.XP2 - lo), Y, C.E - C.D * Y


def _embed_plane_xy(u, v, C):
    Y = _ys(u, C)
    zlo = C.E - C.D * Y
    return C.B * Y + C.C, Y, zlo + v * C.E


def _embed_no_return(u, v, C):
    return u * C.XP2, -C.Y0, v * C.z_max


def _embed_cylinder(u, v, C):
    y = u * 2 / (C.m - 1)
    return y, v * C.z_max, cylinder_w(y, C)


def _surface_normal(grad):
    def normal(X, Y, W, C):
        gx, gy = grad(X, Y, C)
        return gx, gy, -1.0
    return normal


def _build() -> dict:
    def pc_ok(C):
        return C.p <= (C.m * C.N + C.s + 2) / (C.N + C.s + 2)

    out = {}
    out["R1_walls"] = Barrier(
        "R1_walls",
        (Face("X=X(P2)", FINITE, lambda X, Y, Z, C: X - C.XP2, lambda X, Y, Z, C: (1.0, 0.0, 0.0),
              _cf_r1_x, _embed_r1_x),
         Face("Y=Y(P2)", FINITE, lambda X, Y, Z, C: Y - C.YP2, lambda X, Y, Z, C: (0.0, 1.0, 0.0),
              _cf_r1_y, _embed_r1_y)),
        -1, "outward flow is negative on X = X(P2) (Y < Y(P2)) and on Y = Y(P2) (X < X(P2), Z >= 0)")
    out["RoofPlane"] = Barrier(
        "RoofPlane",
        (Face("roof", FINITE, lambda X, Y, Z, C: Y + Z / (C.N + C.s) - 1 / C.N,
              lambda X, Y, Z, C: (0.0, 1.0, 1 / (C.N + C.s)), _cf_roof, _embed_roof),),
        -1, "Y >= 0 portion of the roof plane, 0 <= X <= X(P2); needs p <= pc", pc_ok)
    out["Surface_k1"] = Barrier(
        "Surface_k1",
        (Face("X(Z-1)=k1^2", FINITE, lambda X, Y, Z, C: X * (Z - 1) - C.k1 ** 2,
              lambda X, Y, Z, C: (Z - 1, 0.0, X), _cf_k1, _embed_k1),),
        -1, "0 < X <= X(P2), -k1 <= Y <= 0; needs sigma > 0 small",
        lambda C: 0 < C.s < 2 * C.b ** 2 / (4 * C.a ** 2 * C.XP2 + C.b ** 2))
    out["VPlane_k1"] = Barrier(
        "VPlane_k1",
        (Face("Y=-k1", FINITE, lambda X, Y, Z, C: Y + C.k1, lambda X, Y, Z, C: (0.0, 1.0, 0.0),
              _cf_vplane, _embed_vplane, lambda X, Y, Z, C: C.k1 ** 2 - X * (Z - 1)),),
        1, "Y = -k1 below the surface X(Z-1) = k1^2, 0 <= X <= X(P2)")
    out["SurfaceW"] = Barrier(
        "SurfaceW",
        (Face("W=S(X,Y)", FINITE_W, lambda X, Y, W, C: W - surface_w(X, Y, C),
              _surface_normal(_surface_w_grad), _cf_surface_w, _embed_surface(surface_w)),),
        1, "0 <= X <= X(P2), -Y0 <= Y <= Y(P2); needs N >= 2, sigma <= 0, pc < p < m",
        lambda C: C.N >= 2 and C.s <= 0 and not pc_ok(C))
    out["SurfaceW_N1"] = Barrier(
        "SurfaceW_N1",
        (Face("W=S1(X,Y)", FINITE_W, lambda X, Y, W, C: W - surface_w_n1(X, Y, C),
              _surface_normal(_surface_w_n1_grad), _cf_surface_w_n1, _embed_surface(surface_w_n1)),),
        1, "0 <= X <= X(P2), -Y0 <= Y <= Y(P2); needs N = 1, sigma <= 0",
        lambda C: C.N == 1 and C.s <= 0, requires_n1=True)
    out["PlaneYZ"] = Barrier(
        "PlaneYZ",
        (Face("DY+Z=E", FINITE, lambda X, Y, Z, C: C.D * Y + Z - C.E,
              lambda X, Y, Z, C: (0.0, C.D, 1.0), _cf_plane_yz, _embed_plane_yz),),
        1, "wall of region D: max(0, BY+C) <= X <= X(P2), -Y0 <= Y <= Y(P2); needs sigma large")
    out["PlaneXY"] = Barrier(
        "PlaneXY",
        (Face("X=BY+C", FINITE, lambda X, Y, Z, C: X - C.B * Y - C.C,
              lambda X, Y, Z, C: (1.0, -C.B, 0.0), _cf_plane_xy, _embed_plane_xy,
              lambda X, Y, Z, C: X),),
        1, "wall of region D: E-DY <= Z <= 2E-DY, -Y0 <= Y <= Y(P2), X >= 0; needs sigma large")
    out["NoReturnPlane"] = Barrier(
        "NoReturnPlane",
        (Face("Y=-Y0", FINITE, lambda X, Y, Z, C: Y + C.Y0, lambda X, Y, Z, C: (0.0, 1.0, 0.0),
              _cf_no_return, _embed_no_return),),
        -1, "0 <= X <= X(P2), 0 <= Z <= z_max")
    out["CylinderQ1"] = Barrier(
        "CylinderQ1",
        (Face("cylinder", INF_Q1,
              lambda y, z, w, C: -(C.N - 2) * y + w - C.m * y ** 2 - C.ba * y * w,
              lambda y, z, w, C: (-(C.N - 2) - 2 * C.m * y - C.ba * w, 0.0, 1 - C.ba * y),
              _cf_cylinder, _embed_cylinder, lambda y, z, w, C: 1 - C.ba * y),),
        1, "0 <= y <= 2/(m-1), 0 <= z <= z_max in the chart at Q1")
    return out


BARRIERS: dict = _build()


def get(barrier_id: str | Barrier) -> Barrier:
    if isinstance(barrier_id, Barrier):
        return barrier_id
    try:
        return BARRIERS[barrier_id]
    except KeyError:
        raise KeyError(f"unknown barrier {barrier_id!r}; choose from {', '.join(BARRIER_IDS)}") from None


# ------------------------------------------------------------------ pointwise


def numeric_flow(ps: ParamSet, face: Face, coords: Sequence, C=None) -> tuple:
    """normal·field at ``coords`` and a magnitude scale for comparing it.

    The scale is the sum of the products' sizes, floored at the size the
    quadratic field's own summands reach, so exact cancellations compare
    at roundoff level.
    """
    C = C if C is not None else consts_of(ps)
    a, b, c = coords
    f = field_function(ps, face.chart)(a, b, c)
    n = face.normal(a, b, c, C)
    terms = [n[i] * f[i] for i in range(3)]
    size = (1 + np.maximum(np.maximum(np.abs(a), np.abs(b)), np.abs(c))) ** 2 * (1 + C.m + C.N + abs(C.ba))
    floor = 1e-8 * sum(np.abs(v) for v in n) * size
    return terms[0] + terms[1] + terms[2], np.maximum(sum(np.abs(t) for t in terms), floor)


def agreement(closed: float, numeric: float, scale: float) -> float:
    """Discrepancy relative to the largest of both values and the term magnitude."""
    den = max(abs(closed), abs(numeric), scale)
    return 0.0 if den == 0 else abs(closed - numeric) / den


@dataclass
class FlowValue:
    barrier: str
    face: str
    closed_form: float
    numeric: float
    rel_diff: float

    def to_json(self) -> dict:
        return dict(self.__dict__)


def _as_state(s, chart: Chart) -> PhaseState:
    if isinstance(s, PhaseState):
        return s if s.chart == chart else transform(s, chart)
    return PhaseState(chart, tuple(s))


def flow_value(ps: ParamSet, barrier: str | Barrier, s) -> FlowValue:
    """Closed-form and numeric flow across the barrier face containing ``s``.

    ``s`` is a :class:`PhaseState` (converted to the barrier's chart) or a
    coordinate triple already in that chart.
    """
    bar = get(barrier)
    bar.check(ps)
    C = consts_of(ps)
    best = None
    for face in bar.faces:
        st = _as_state(s, face.chart)
        gval = abs(face.g(*st.coords, C))
        if best is None or gval < best[0]:
            best = (gval, face, st)
    gval, face, st = best
    if not gval < G_TOL:
        raise OffBarrier(f"|g| = {gval:.3e} at {st.coords} is not on barrier {bar.id}")
    cf = float(face.closed_form(*st.coords, C))
    num, scale = numeric_flow(ps, face, st.coords, C)
    rel = agreement(cf, num, scale)
    if rel > AGREE_TOL:
        raise ClosedFormMismatch(f"{bar.id}/{face.name}: closed form {cf!r} vs numeric {num!r}")
    return FlowValue(bar.id, face.name, cf, float(num), rel)


def flow_through(ps: ParamSet, barrier: str | Barrier, s) -> float:
    """Signed flow across the barrier at an on-barrier state (closed form, cross-checked)."""
    return flow_value(ps, barrier, s).closed_form


def sample_on_barrier(ps: ParamSet, barrier: str | Barrier, n: int, rng=None,
                      face: str | None = None) -> list:
    """Random admissible states on a barrier face, as chart-coordinate triples."""
    bar = get(barrier)
    fc = bar.face(face)
    rng = np.random.default_rng(rng)
    C = consts_of(ps)
    out = []
    while len(out) < n:
        u, v = rng.uniform(1e-6, 1.0, size=2)
        a, b, c = (float(t) for t in fc.embed(u, v, C))
        if fc.mask is not None and not fc.mask(a, b, c, C) > 0:
            continue
        out.append((a, b, c))
    return out


# --------------------------------------------------------------- certificates


@dataclass
class BarrierReport:
    barrier: str
    mode: str
    params: Optional[dict]
    box: Optional[dict]
    grid: Optional[int]
    expected_sign: int
    min_value: float
    max_value: float
    verdict: str
    witness: Optional[dict] = None
    evaluated: int = 0
    max_rel_diff: Optional[float] = None
    hypothesis_holds: Optional[bool] = None
    region: str = ""

    @property
    def certified(self) -> bool:
        return self.verdict == "certified_sign"

    @property
    def margin(self) -> float:
        return self.min_value if self.expected_sign > 0 else -self.max_value

    def to_json(self) -> dict:
        out = dict(self.__dict__)
        out["margin"] = self.margin
        return out


def _param_points(box: Mapping, per_dim: int) -> list:
    axes = []
    for key in ("m", "p", "N", "sigma"):
        v = box[key]
        if key == "N":
            axes.append(list(range(int(v[0]), int(v[1]) + 1)) if isinstance(v, (list, tuple)) else [int(v)])
        elif isinstance(v, (list, tuple)) and v[0] != v[1]:
            axes.append(list(np.linspace(float(v[0]), float(v[1]), per_dim)))
        else:
            axes.append([float(v[0] if isinstance(v, (list, tuple)) else v)])
    return [validate(t) for t in itertools.product(*axes)]


def _grid_one(ps: ParamSet, bar: Barrier, n: int, state_box) -> tuple:
    C = consts_of(ps)
    t = (np.arange(n) + 0.5) / n
    (u0, u1), (v0, v1) = state_box
    U, V = np.meshgrid(u0 + t * (u1 - u0), v0 + t * (v1 - v0), indexing="ij")
    lo, hi, wit, count, gap = math.inf, -math.inf, None, 0, 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        for face in bar.faces:
            A, B, Cc = (np.broadcast_to(np.asarray(x, dtype=float), U.shape) for x in face.embed(U, V, C))
            ok = np.isfinite(A) & np.isfinite(B) & np.isfinite(Cc)
            if face.mask is not None:
                ok &= np.asarray(face.mask(A, B, Cc, C)) > 0
            if not ok.any():
                continue
            a, b, c = A[ok], B[ok], Cc[ok]
            cf = np.asarray(face.closed_form(a, b, c, C), dtype=float)
            num, scale = numeric_flow(ps, face, (a, b, c), C)
            den = np.maximum(np.maximum(np.abs(cf), np.abs(num)), scale)
            gap = max(gap, float(np.max(np.where(den > 0, np.abs(cf - num) / np.where(den > 0, den, 1), 0))))
            count += cf.size
            lo, hi = min(lo, float(cf.min())), max(hi, float(cf.max()))
            k = int(np.argmin(bar.sign * cf))
            if bar.sign * cf[k] <= 0 and (wit is None or bar.sign * cf[k] < bar.sign * wit["value"]):
                wit = {"params": ps.to_json(), "face": face.name, "chart": face.chart.id,
                       "coords": [float(a[k]), float(b[k]), float(c[k])], "value": float(cf[k])}
    return lo, hi, wit, count, gap


def _certify_grid(bar: Barrier, pts: list, n: int, state_box) -> tuple:
    lo, hi, wit, count, gap, hyp = math.inf, -math.inf, None, 0, 0.0, True
    for ps in pts:
        bar.check(ps)
        l, h, w, c, g = _grid_one(ps, bar, n, state_box)
        lo, hi, count, gap = min(lo, l), max(hi, h), count + c, max(gap, g)
        hyp = hyp and bool(bar.hypothesis(consts_of(ps)))
        if w is not None and (wit is None or bar.sign * w["value"] < bar.sign * wit["value"]):
            wit = w
    return lo, hi, wit, count, gap, hyp


def _iv(lo: float, hi: float):
    return iv.mpf([lo, hi])


def _certify_interval(bar: Barrier, box: Mapping, max_boxes: int, state_box) -> tuple:
    """Branch and bound over (u, v, m, p, σ) for each integer N in the box."""
    names = ["u", "v", "m", "p", "sigma"]
    Ns = box["N"]
    Ns = range(int(Ns[0]), int(Ns[1]) + 1) if isinstance(Ns, (list, tuple)) else [int(Ns)]
    base = {k: tuple(float(x) for x in (box[k] if isinstance(box[k], (list, tuple)) else (box[k], box[k])))
            for k in ("m", "p", "sigma")}
    base.update(u=tuple(map(float, state_box[0])), v=tuple(map(float, state_box[1])))
    width0 = {k: (base[k][1] - base[k][0]) or 1.0 for k in names}
    lo_all, hi_all, evaluated = math.inf, -math.inf, 0
    inconclusive = False
    sg = bar.sign

    def point_value(face, N, pt):
        ps = validate((pt["m"], pt["p"], N, pt["sigma"]))
        C = consts_of(ps)
        a, b, c = face.embed(pt["u"], pt["v"], C)
        if face.mask is not None and not face.mask(a, b, c, C) > 0:
            return None, ps, (a, b, c)
        return float(face.closed_form(a, b, c, C)), ps, (a, b, c)

    for N in Ns:
        if bar.requires_n1 and N != 1:
            raise RangeViolation("N_sigma", f"{bar.id} is defined for N = 1 only, got N = {N}")
        for face in bar.faces:
            stack = [dict(base)]
            while stack:
                if evaluated >= max_boxes:
                    inconclusive = True
                    break
                bx = stack.pop()
                evaluated += 1
                C = consts(_iv(*bx["m"]), _iv(*bx["p"]), N, _iv(*bx["sigma"]))
                try:
                    a, b, c = face.embed(_iv(*bx["u"]), _iv(*bx["v"]), C)
                    if face.mask is not None and _hi(face.mask(a, b, c, C)) <= 0:
                        continue
                    val = face.closed_form(a, b, c, C)
                    vlo, vhi = _lo(val), _hi(val)
                except ZeroDivisionError:
                    vlo, vhi = -math.inf, math.inf
                if math.isnan(vlo) or math.isnan(vhi):
                    vlo, vhi = -math.inf, math.inf
                if (sg > 0 and vlo > 0) or (sg < 0 and vhi < 0):
                    lo_all, hi_all = min(lo_all, vlo), max(hi_all, vhi)
                    continue
                mid = {k: 0.5 * (bx[k][0] + bx[k][1]) for k in names}
                try:
                    pv, ps, coords = point_value(face, N, mid)
                except (ZeroDivisionError, RangeViolation):
                    pv = None
                if pv is not None and sg * pv <= 0:
                    wit = {"params": ps.to_json(), "face": face.name, "chart": face.chart.id,
                           "coords": [float(x) for x in coords], "value": pv}
                    return min(lo_all, pv), max(hi_all, pv), "violated", wit, evaluated
                k = max(names, key=lambda n_: (bx[n_][1] - bx[n_][0]) / width0[n_])
                if bx[k][1] - bx[k][0] <= 0:
                    inconclusive = True
                    continue
                left, right = dict(bx), dict(bx)
                left[k] = (bx[k][0], mid[k])
                right[k] = (mid[k], bx[k][1])
                stack.extend((left, right))
    verdict = "inconclusive" if inconclusive else "certified_sign"
    return lo_all, hi_all, verdict, None, evaluated


def certify_sign(target, barrier: str | Barrier, mode: str = "grid", grid: int = DEFAULT_GRID,
                 max_boxes: int = MAX_BOXES, param_samples: int = 3,
                 state_box=((0.0, 1.0), (0.0, 1.0))) -> BarrierReport:
    """Check the sign of the flow across a barrier on its admissible region.

    ``target`` is a :class:`ParamSet`, a parameter tuple, or a box mapping
    ``m``, ``p``, ``sigma`` to intervals and ``N`` to an integer or integer
    range.  Grid mode samples cell centres of an ``grid``×``grid`` mesh on
    each face (and ``param_samples`` points per parameter interval).
    Interval mode encloses the closed form with outward-rounded interval
    arithmetic and bisects until every box has the expected sign.
    ``state_box`` restricts both modes to a sub-rectangle of the unit square
    that parameterizes each face.
    """
    bar = get(barrier)
    if isinstance(target, Mapping) and any(isinstance(v, (list, tuple)) for v in target.values()):
        box = {k: list(v) if isinstance(v, (list, tuple)) else v for k, v in target.items()}
        params = None
    else:
        ps = target if isinstance(target, ParamSet) else validate(target)
        params = ps.to_json()
        box = {"m": ps.m, "p": ps.p, "N": ps.N, "sigma": ps.sigma}
    if mode == "grid":
        pts = _param_points(box, param_samples) if params is None else [validate(box)]
        lo, hi, wit, count, gap, hyp = _certify_grid(bar, pts, grid, state_box)
        verdict = "violated" if wit is not None else "certified_sign"
        return BarrierReport(bar.id, "grid", params, None if params else box, grid, bar.sign,
                             lo, hi, verdict, wit, count, gap, hyp, bar.region)
    if mode == "interval":
        fbox = {k: ([float(v), float(v)] if k != "N" and not isinstance(v, list) else v)
                for k, v in box.items()}
        lo, hi, verdict, wit, count = _certify_interval(bar, fbox, max_boxes, state_box)
        return BarrierReport(bar.id, "interval", params, None if params else box, None, bar.sign,
                             lo, hi, verdict, wit, count, None, None, bar.region)
    raise ValueError(f"unknown mode {mode!r}; use 'grid' or 'interval'")


# ------------------------------------------------------------------- regions


def _classify(margins: Sequence[float], tol: float) -> str:
    low = min(margins)
    if low > tol:
        return "inside"
    return "boundary" if low >= -tol else "outside"


def region_membership(ps: ParamSet, s, tol: float = 1e-12) -> dict:
    """Where a finite state sits relative to R1, W, V and D.

    Each flag is ``inside``, ``boundary`` or ``outside``; regions that do not
    apply to the dimension are reported as ``None``.
    """
    st = _as_state(s, FINITE) if not (isinstance(s, PhaseState) and s.chart == FINITE_W) else s
    C = consts_of(ps)
    if st.chart == FINITE_W:
        X, Y, W = st.coords
        Z = W / X if X != 0 else 0.0
    else:
        X, Y, Z = st.coords
        W = X * Z
    walls = [C.XP2 - X, C.YP2 - Y]
    out = {"R1": _classify(walls, tol), "W": None, "V": None}
    if C.N >= 2:
        out["W"] = _classify(walls + [X, W, surface_w(X, Y, C) - W], tol)
    else:
        out["V"] = _classify(walls + [X, W, surface_w_n1(X, Y, C) - W], tol)
    out["D"] = _classify([X - C.B * Y - C.C, Z - C.E + C.D * Y, X, C.XP2 - X, Y + C.Y0, C.YP2 - Y], tol)
    return out


# --------------------------------------------------------- entry of the P2 orbit


@dataclass
class EigvecEntry:
    plane_xy: float
    plane_yz: float
    closed_xy: float
    closed_yz: float
    printed_xy: float

    @property
    def enters(self) -> bool:
        return self.plane_xy > 0 and self.plane_yz > 0

    def to_json(self) -> dict:
        out = dict(self.__dict__)
        out["enters"] = self.enters
        return out


def _e3_closed(C) -> tuple:
    m, p, N, s = C.m, C.p, C.N, C.s
    Xe = -(m - 1) ** 3
    Ye = -(m - 1) * ((s + 2) * (m - 1) + 2 * (p - 1))
    Ze = ((s + 2) ** 2 * (m - 1) ** 2 + (s + 2) * ((N - 2) * (m - 1) ** 2 + 4 * p * (m - 1))
          + 2 * N * (m - 1) ** 2 + 4 * (p - 1) ** 2 - 4 * (m - 2) * (p - 1))
    return Xe, Ye, Ze


def entry_product_yz(C):
    """Normal of the plane DY + Z = E against e3, as a polynomial in σ."""
    m, p, N, s = C.m, C.p, C.N, C.s
    return ((m - 1) ** 2 * s ** 2 - (m - 1) * (2 * (m - 1) ** 2 * N ** 2 + 7 * (m - 1) * N - 2 * (m + 2 * p - 5)) * s
            - 4 * (m - 1) ** 2 * (m + p - 2) * N ** 2 - 4 * (m - 1) * (3 * m + 4 * p - 7) * N
            + 4 * m * p + 4 * p ** 2 - 12 * m - 24 * p + 28)


def entry_product_xy_printed(C):
    """Rational expression printed for the X = BY + C product; kept for comparison only."""
    m, p, N, s = C.m, C.p, C.N, C.s
    dd = (2 * (m - 1) ** 2 * N + 4 * m - 3) * s + 4 * (p - 1) * (m - 1) * N + 2 * m + 6 * (p - 1)
    return m * (m - 1) ** 3 / dd * s + 2 * m * (m - 1) ** 2 * (m + p - 2) / dd - (m - 1) ** 3


def entry_product_xy(C):
    m, p, N, s = C.m, C.p, C.N, C.s
    return -(m - 1) ** 3 + C.B * (m - 1) * ((s + 2) * (m - 1) + 2 * (p - 1))


def eigvec_entry_test(ps: ParamSet) -> EigvecEntry:
    """Products of the P2 eigenvector e3 with the inward normals of the walls of D.

    The numeric products use the null vector of J(P2) - λ3 I, scaled to the
    closed-form normalisation of e3.
    """
    from .critical import p2_coords, p2_lambda3

    C = consts_of(ps)
    J = jacobian(ps, PhaseState(FINITE, p2_coords(ps))) - p2_lambda3(ps) * np.eye(3)
    v = np.linalg.svd(J)[2][-1]
    Xe, Ye, Ze = _e3_closed(C)
    v = v * (Xe / v[0])
    return EigvecEntry(float(v[0] - C.B * v[1]), float(C.D * v[1] + v[2]),
                       float(entry_product_xy(C)), float(entry_product_yz(C)),
                       float(entry_product_xy_printed(C)))


def sigma_s_estimate(m, p, N, upper: float = 50.0) -> dict:
    """Largest σ̂ with σ < 2β²/(4α²X(P2) + β²) on the whole of (0, σ̂)."""

    def gap(s):
        C = consts(float(m), float(p), int(N), s)
        return s - 2 * C.b ** 2 / (4 * C.a ** 2 * C.XP2 + C.b ** 2)

    tiny = 1e-12
    rhs0 = -gap(tiny) + tiny
    grid = np.linspace(tiny, upper, 2001)
    vals = [gap(s) for s in grid]
    for s0, s1, g0, g1 in zip(grid, grid[1:], vals, vals[1:]):
        if g0 < 0 <= g1:
            return {"sigma_s": float(brentq(gap, s0, s1, xtol=1e-14)), "rhs_at_0": rhs0}
    return {"sigma_s": None if vals[0] >= 0 else float(upper), "rhs_at_0": rhs0}


# ------------------------------------------------------- sign polynomial family


def _xp2(m, p, N, s):
    return consts(m, p, N, s).XP2


def poly_L1(m, p, N, s):
    """X³ against half the X² term; negative on σ ∈ (-2, 0)."""
    return (-(m + 1) * (m - 1) ** 2 * s ** 3 - 2 * (m - 1) * (m + 1) * (2 * m + p - 3) * s ** 2
            + (4 * (m + 1) * (m - 1) ** 2 * N ** 2 + 8 * (m - 1) * (m ** 2 + m + 2) * N
               + 12 * m ** 3 - 8 * m ** 2 * p + 44 * m ** 2 + 4 * m + 8 * p + 4) * s
            - 8 * (m - 1) * (N - 1) * (((m + 1) * (m - p) + (m - 1) ** 2) * N + 3 * m * p + m + 3 * (p - 1)))


def poly_L1_tilde(m, p, N, s):
    """X³ against a third of the X² term (m ≥ 3)."""
    return (-3 * (m + 1) * (m - 1) ** 2 * s ** 3 - 6 * (m - 1) * (m + 1) * (2 * m + p - 3) * s ** 2
            + (12 * (m + 1) * (m - 1) ** 2 * N ** 2 + 16 * (m + 3) * (m - 1) * N
               + 36 * m ** 3 - 24 * m ** 2 * p + 84 * m ** 2 - 4 * m + 24 * p + 12) * s
            - 8 * (m - 1) * (N - 1) * ((4 * m ** 2 - (3 * p + 1) * m - 3 * p + 3) * N + (9 * p - 1) * m + 9 * (p - 1)))


def poly_L2(m, p, N, s):
    """X²Y and XY terms for Y > 0; positive on σ ∈ (-2, 0]."""
    return (-(m - 1) ** 2 * (m + 1) * s ** 3 - 2 * (m - 1) * (m + 1) * ((m - 1) * N + p - 1) * s ** 2
            + 4 * ((9 * m ** 3 - 6 * m ** 2 - m - 2) * N + m ** 3 + 19 * m ** 2 + 3 * m + 1
                   - (m ** 2 - 1) * N * p) * s
            + 16 * m * (m ** 2 - 1) * N ** 2 + (48 * m ** 3 - 24 * m ** 2 + 48 * m - 8) * N
            + 88 * m ** 2 - 32 * m + 8 - 8 * (m ** 2 - 1) * (N - 1) * p)


def poly_L3(m, p, N, s):
    """Numerator of the Y³, Y², XY² combination for Y > 0; negative there."""
    return ((2 * (m - 1) ** 2 * s - 4 * (m - 1) * (2 * m - p + 1)) * N
            + (m - 1) ** 2 * s ** 2 + 2 * (m - 1) * (m + p) * s + 4 * m * p - 20 * m + 4 * p - 4)


def poly_P(m, p, N, s):
    """poly_L3 at N = 1; negative on σ ∈ (-2, 0)."""
    return (m - 1) ** 2 * s ** 2 + 2 * (m - 1) * (2 * m - 1 + p) * s - 8 * m * (m - p + 2)


def poly_L4(m, p, N, s):
    """Y < 0 combination with half the Y² term; negative on σ ∈ (-2, 0]."""
    return (2 * N + s - 2) * (s + 2) * _xp2(m, p, N, s) - 2 * m


def poly_L4_tilde(m, p, N, s):
    """Y < 0 combination with a third of the Y² term (m ≤ 3)."""
    return 3 * (2 * N + s - 2) * (s + 2) * _xp2(m, p, N, s) - 4 * m


def _ee(m, N, s):
    return 2 * N * m + 5 * m * s + 2 * N + 6 * m + s - 2


def poly_L5(m, p, N, s):
    """X², Y², XY balance with weights 1/2 and 2/3; positive for N ≥ 5, pc ≤ p < m."""
    return (16 * m * (m + 1) * (s + 2) * (2 * (N - 1) * (m - 1) - (3 * m + 1) * s)
            - 3 * (m - p) * _ee(m, N, s) ** 2)


def poly_P_pc(m, N, s):
    """(N+σ+2)/(σ+2) · poly_L5 at p = pc(σ)."""
    return (-(3 * m - 1) * (41 * m ** 2 + 20 * m + 3) * s ** 2
            - (4 * (m + 1) * (19 * m ** 2 - 3) * N + 308 * m ** 3 - 76 * m ** 2 + 12 * m + 12) * s
            + 4 * (m - 1) * ((5 * m - 3) * (m + 1) * N ** 2 - 2 * (5 * m - 3) * (m + 1) * N - 43 * m ** 2 + 2 * m - 3))


def poly_Q(m, p, N, s):
    """Same balance with weights 1/2 and 9/10 for N = 3, 4; negative there."""
    return (-36 * m * (m + 1) * (s + 2) * (2 * (N - 1) * (m - 1) - (3 * m + 1) * s)
            + 5 * (m - p) * _ee(m, N, s) ** 2)


def poly_R(m, N, s):
    """-(N+σ+2)/(σ+2) · poly_Q at p = pc(σ); positive for N ≥ 3."""
    return (-(233 * m ** 3 + 69 * m ** 2 - 9 * m - 5) * s ** 2
            - (136 * N * m ** 3 + 164 * N * m ** 2 + 588 * m ** 3 + 8 * N * m - 52 * m ** 2 - 20 * N + 20 * m + 20) * s
            + 4 * (m - 1) * ((m + 1) * (13 * m - 5) * N ** 2 - 2 * (m + 1) * (6 * m - 5) * N - 81 * m ** 2 - 6 * m - 5))


def poly_R_N2(m, s):
    """Dimension-two remainder at p = pc(σ); negative on σ ∈ (-2, 0]."""
    return ((73 * m ** 3 + 49 * m ** 2 + 7 * m - 1) * s ** 2 + (260 * m ** 3 + 196 * m ** 2 + 60 * m - 4) * s
            - 4 * (m - 1) * (7 * m ** 2 + 22 * m - 1))


def poly_P3(m, p, s):
    """X³ against a tenth of the X² term, N = 3; negative on σ ∈ (-2, 0]."""
    return (5 * (m + 1) * (m - 1) ** 2 * s ** 3 + 10 * (m - 1) * (m + 1) * (2 * m + p - 3) * s ** 2
            + (-72 * m ** 3 + 40 * m ** 2 * p - 40 * m ** 2 + 8 * m - 40 * p + 40) * s
            + 32 * m * (3 * m - 1) * (m - 1))


def poly_P4(m, p, s):
    """Same as poly_P3 for N = 4."""
    return (5 * (m + 1) * (m - 1) ** 2 * s ** 3 + 10 * (m - 1) * (m + 1) * (2 * m + p - 3) * s ** 2
            + (-156 * m ** 3 + 40 * m ** 2 * p + 36 * m ** 2 + 76 * m - 40 * p - 20) * s
            + 24 * (m - 1) * (8 * m ** 2 - 5 * p * (m + 1) + m + 5))


def poly_S(m, p, N, s):
    """-32m(m+1)φ̂²(σ+2)² W(P2)/L with W the surface height; negative on σ ∈ (-2, 0]."""
    q = (2 * m ** 3 * s ** 2 + 16 * m ** 3 * s + 24 * m ** 3 - 2 * m ** 2 * s ** 2 + 72 * m ** 2
         - 2 * m * s ** 2 - 16 * m * s + 40 * m + 2 * s ** 2 - 8
         + N * (4 * m ** 3 * s + 40 * m ** 3 - 4 * m ** 2 * s - 8 * m ** 2 - 4 * m * s - 40 * m + 4 * s + 8))
    r = ((m ** 4 - 2 * m ** 3 + 2 * m - 1) * s ** 3
         + (2 * N * (m ** 4 - 2 * m ** 3 + 2 * m - 1) + 8 * m ** 4 - 10 * m ** 3 - 6 * m ** 2 + 10 * m - 2) * s ** 2
         + (-N * (12 * m ** 4 - 36 * m ** 3 + 44 * m ** 2 - 28 * m + 8) + 12 * m ** 4 - 56 * m ** 3 + 48 * m ** 2
            - 8 * m + 4) * s
         - N * (64 * m ** 4 - 88 * m ** 3 + 56 * m ** 2 - 40 * m + 8) - 152 * m ** 3 + 56 * m ** 2 - 40 * m + 8)
    return r + p * q


@dataclass(frozen=True)
class SignPolynomial:
    name: str
    fn: Callable
    args: tuple
    expected_sign: int
    where: str


SIGN_POLYNOMIALS: dict = {sp.name: sp for sp in (
    SignPolynomial("L1", poly_L1, ("m", "p", "N", "sigma"), -1, "-2 < sigma < 0"),
    SignPolynomial("L1_tilde", poly_L1_tilde, ("m", "p", "N", "sigma"), -1, "-2 < sigma < 0, m >= 3, N >= 2"),
    SignPolynomial("L2", poly_L2, ("m", "p", "N", "sigma"), 1, "-2 < sigma <= 0, N >= 2"),
    SignPolynomial("L3", poly_L3, ("m", "p", "N", "sigma"), -1, "-2 < sigma < 0"),
    SignPolynomial("P", poly_P, ("m", "p", "N", "sigma"), -1, "-2 < sigma < 0"),
    SignPolynomial("L4", poly_L4, ("m", "p", "N", "sigma"), -1, "-2 < sigma <= 0"),
    SignPolynomial("L4_tilde", poly_L4_tilde, ("m", "p", "N", "sigma"), -1, "-2 < sigma <= 0, 1 < m <= 3, N >= 2"),
    SignPolynomial("L5", poly_L5, ("m", "p", "N", "sigma"), 1, "-2 < sigma <= 0, N >= 5, pc <= p < m"),
    SignPolynomial("P_pc", poly_P_pc, ("m", "N", "sigma"), 1, "-2 < sigma <= 0, N >= 5"),
    SignPolynomial("Q", poly_Q, ("m", "p", "N", "sigma"), -1, "-2 < sigma <= 0, N in {3, 4}, pc <= p < m"),
    SignPolynomial("R", poly_R, ("m", "N", "sigma"), 1, "-2 < sigma <= 0, N >= 3"),
    SignPolynomial("R_N2", poly_R_N2, ("m", "sigma"), -1, "-2 < sigma <= 0"),
    SignPolynomial("P3", poly_P3, ("m", "p", "sigma"), 1, "-2 < sigma <= 0"),
    SignPolynomial("P4", poly_P4, ("m", "p", "sigma"), 1, "-2 < sigma <= 0"),
    SignPolynomial("S", poly_S, ("m", "p", "N", "sigma"), -1, "-2 < sigma <= 0, N >= 2"),
)}


def sign_polynomial(name: str, **values) -> float:
    sp = SIGN_POLYNOMIALS[name]
    return sp.fn(*(values[a] for a in sp.args))
