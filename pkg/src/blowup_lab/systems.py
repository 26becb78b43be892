"""Polynomial vector fields of the phase space, their Jacobians and chart maps.

The finite chart uses the variables

    X = (m/α) ξ^{-2} f^{m-1},   Y = (m/α) ξ^{-1} f^{m-2} f',   Z = (1/α) ξ^σ f^{p-1}

with the independent variable η.  Charts at infinity divide by the dominant
coordinate and use a rescaled chart time τ; every chart field is signed so
that τ increases together with η, and :func:`eta_rate` returns dη/dτ.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ChartSingular
from .params import ParamSet, derive

SINGULAR = 1e-300

Triple = tuple[float, float, float]
FieldFn = Callable[[float, float, float], Triple]


class ChartKind(enum.Enum):
    FINITE_XYZ = "Finite_XYZ"
    FINITE_XYW = "Finite_XYW"
    INF_Q1 = "InfQ1_yzw"
    INF_Q23 = "InfQ23_xzw"
    PLANE_Z0 = "Plane_Z0"
    PLANE_X0 = "Plane_X0_YZbar"


@dataclass(frozen=True)
class Chart:
    kind: ChartKind
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("chart sign must be +1 or -1")

    @property
    def id(self) -> str:
        if self.kind is ChartKind.INF_Q23:
            return self.kind.value + ("+" if self.sign > 0 else "-")
        return self.kind.value

    @property
    def at_infinity(self) -> bool:
        return self.kind in (ChartKind.INF_Q1, ChartKind.INF_Q23)

    @classmethod
    def parse(cls, text: str) -> "Chart":
        text = text.strip()
        if text.startswith(ChartKind.INF_Q23.value):
            suffix = text[len(ChartKind.INF_Q23.value):]
            return cls(ChartKind.INF_Q23, -1 if suffix == "-" else 1)
        return cls(ChartKind(text))

    def __str__(self) -> str:
        return self.id


FINITE = Chart(ChartKind.FINITE_XYZ)
FINITE_W = Chart(ChartKind.FINITE_XYW)
INF_Q1 = Chart(ChartKind.INF_Q1)
INF_Q2 = Chart(ChartKind.INF_Q23, 1)
INF_Q3 = Chart(ChartKind.INF_Q23, -1)
PLANE_Z0 = Chart(ChartKind.PLANE_Z0)
PLANE_X0 = Chart(ChartKind.PLANE_X0)


@dataclass(frozen=True)
class PhaseState:
    chart: Chart
    coords: Triple
    eta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(float(c) for c in self.coords))

    def array(self) -> np.ndarray:
        return np.array(self.coords)


@dataclass(frozen=True)
class Coefficients:
    """Float coefficients shared by every chart field."""

    m: float
    p: float
    N: float
    s: float
    alpha: float
    beta: float
    ba: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "ba", self.beta / self.alpha)

    @classmethod
    def of(cls, ps: ParamSet) -> "Coefficients":
        d = derive(ps)
        m, p, N, s = ps.as_tuple()
        return cls(m, p, float(N), s, float(d.alpha), float(d.beta))


def field_function(ps: ParamSet, chart: Chart) -> FieldFn:
    """Fast scalar-argument version of :func:`vector_field` for one chart."""
    c = Coefficients.of(ps)
    m, p, N, s, ba = c.m, c.p, c.N, c.s, c.ba
    kind = chart.kind

    if kind is ChartKind.FINITE_XYZ:
        def f(X, Y, Z):
            return (X * ((m - 1) * Y - 2 * X),
                    -Y * Y - ba * Y + X - N * X * Y - X * Z,
                    Z * ((p - 1) * Y + s * X))
    elif kind is ChartKind.FINITE_XYW:
        def f(X, Y, W):
            return (X * ((m - 1) * Y - 2 * X),
                    -Y * Y - ba * Y + X - N * X * Y - W,
                    W * ((m + p - 2) * Y + (s - 2) * X))
    elif kind is ChartKind.INF_Q1:
        def f(y, z, w):
            return (-(N - 2) * y - z + w - m * y * y - ba * y * w,
                    (s + 2) * z + (p - m) * y * z,
                    2 * w - (m - 1) * y * w)
    elif kind is ChartKind.INF_Q23:
        sg = float(chart.sign)

        def f(x, z, w):
            return (sg * (m * x + (N - 2) * x * x + ba * x * w - x * x * w + x * x * z),
                    sg * (p * z + ba * z * w + (N + s) * x * z + x * z * z - x * z * w),
                    sg * (w + ba * w * w - x * w * w + N * x * w + x * z * w))
    elif kind is ChartKind.PLANE_Z0:
        def f(X, Y, Z):
            return (X * ((m - 1) * Y - 2 * X), -Y * Y - ba * Y + X - N * X * Y, 0.0)
    else:
        def f(X, Y, W):
            return (0.0, -Y * Y - ba * Y - W, (m + p - 2) * Y * W)
    return f


def jacobian_function(ps: ParamSet, chart: Chart) -> Callable[[float, float, float], list]:
    c = Coefficients.of(ps)
    m, p, N, s, ba = c.m, c.p, c.N, c.s, c.ba
    kind = chart.kind

    if kind is ChartKind.FINITE_XYZ:
        def j(X, Y, Z):
            return [[(m - 1) * Y - 4 * X, (m - 1) * X, 0.0],
                    [1 - N * Y - Z, -2 * Y - ba - N * X, -X],
                    [s * Z, (p - 1) * Z, (p - 1) * Y + s * X]]
    elif kind is ChartKind.FINITE_XYW:
        def j(X, Y, W):
            return [[(m - 1) * Y - 4 * X, (m - 1) * X, 0.0],
                    [1 - N * Y, -2 * Y - ba - N * X, -1.0],
                    [(s - 2) * W, (m + p - 2) * W, (m + p - 2) * Y + (s - 2) * X]]
    elif kind is ChartKind.INF_Q1:
        def j(y, z, w):
            return [[-(N - 2) - 2 * m * y - ba * w, -1.0, 1 - ba * y],
                    [(p - m) * z, (s + 2) + (p - m) * y, 0.0],
                    [-(m - 1) * w, 0.0, 2 - (m - 1) * y]]
    elif kind is ChartKind.INF_Q23:
        sg = float(chart.sign)

        def j(x, z, w):
            rows = [[m + 2 * (N - 2) * x + ba * w - 2 * x * w + 2 * x * z, x * x, ba * x - x * x],
                    [(N + s) * z + z * z - z * w, p + ba * w + (N + s) * x + 2 * x * z - x * w, ba * z - x * z],
                    [-w * w + N * w + z * w, x * w, 1 + 2 * ba * w - 2 * x * w + N * x + x * z]]
            return [[sg * v for v in row] for row in rows]
    elif kind is ChartKind.PLANE_Z0:
        def j(X, Y, Z):
            return [[(m - 1) * Y - 4 * X, (m - 1) * X, 0.0],
                    [1 - N * Y, -2 * Y - ba - N * X, 0.0],
                    [0.0, 0.0, 0.0]]
    else:
        def j(X, Y, W):
            return [[0.0, 0.0, 0.0],
                    [0.0, -2 * Y - ba, -1.0],
                    [0.0, (m + p - 2) * W, (m + p - 2) * Y]]
    return j


def vector_field(ps: ParamSet, s: PhaseState) -> np.ndarray:
    """Right-hand side of the chart's system at ``s``."""
    return np.array(field_function(ps, s.chart)(*s.coords))


def jacobian(ps: ParamSet, s: PhaseState) -> np.ndarray:
    """Analytic Jacobian of :func:`vector_field`."""
    return np.array(jacobian_function(ps, s.chart)(*s.coords), dtype=float)


def eta_rate(chart: Chart, coords: Sequence[float]) -> float:
    """dη/dτ for the chart time τ (1 in the finite charts)."""
    if chart.kind is ChartKind.INF_Q1:
        return coords[2]
    if chart.kind is ChartKind.INF_Q23:
        return chart.sign * coords[2]
    return 1.0


def _check(value: float, what: str) -> None:
    if not abs(value) > SINGULAR:
        raise ChartSingular(f"cannot divide by {what} = {value!r}")


def to_finite(chart: Chart, coords: Sequence[float]) -> Triple:
    """Map chart coordinates to (X, Y, Z)."""
    a, b, c = coords
    kind = chart.kind
    if kind in (ChartKind.FINITE_XYZ, ChartKind.PLANE_Z0):
        return (a, b, c)
    if kind is ChartKind.FINITE_XYW:
        _check(a, "X")
        return (a, b, c / a)
    if kind is ChartKind.INF_Q1:
        _check(c, "w")
        return (1.0 / c, a / c, b / c)
    if kind is ChartKind.INF_Q23:
        _check(c, "w")
        return (a / c, 1.0 / c, b / c)
    raise ChartSingular("the plane X = 0 of the W chart has no finite (X, Y, Z) image")


def from_finite(target: Chart, X: float, Y: float, Z: float) -> tuple[Chart, Triple]:
    kind = target.kind
    if kind is ChartKind.FINITE_XYZ:
        return target, (X, Y, Z)
    if kind is ChartKind.PLANE_Z0:
        if Z != 0.0:
            raise ChartSingular("state is not on the plane Z = 0")
        return target, (X, Y, 0.0)
    if kind is ChartKind.FINITE_XYW:
        return target, (X, Y, X * Z)
    if kind is ChartKind.PLANE_X0:
        if X != 0.0:
            raise ChartSingular("state is not on the plane X = 0")
        return target, (0.0, Y, 0.0)
    if kind is ChartKind.INF_Q1:
        _check(X, "X")
        return target, (Y / X, Z / X, 1.0 / X)
    _check(Y, "Y")
    return Chart(ChartKind.INF_Q23, 1 if Y > 0 else -1), (X / Y, Z / Y, 1.0 / Y)


def transform(s: PhaseState, target: Chart | ChartKind) -> PhaseState:
    """Convert a state to another chart, keeping η.

    For the Q2/Q3 chart the sign is taken from the sign of Y, not from
    ``target``.
    """
    if isinstance(target, ChartKind):
        target = Chart(target)
    src = s.chart
    a, b, c = s.coords
    if src.kind is target.kind and src.kind is not ChartKind.INF_Q23:
        return PhaseState(target, s.coords, s.eta)
    # direct maps between the two charts at infinity avoid overflow
    if src.kind is ChartKind.INF_Q1 and target.kind is ChartKind.INF_Q23:
        _check(a, "y")
        return PhaseState(Chart(ChartKind.INF_Q23, 1 if a * c > 0 else -1), (1.0 / a, b / a, c / a), s.eta)
    if src.kind is ChartKind.INF_Q23 and target.kind is ChartKind.INF_Q1:
        _check(a, "x")
        return PhaseState(INF_Q1, (1.0 / a, b / a, c / a), s.eta)
    if src.kind is ChartKind.PLANE_X0 and target.kind is ChartKind.FINITE_XYW:
        return PhaseState(target, s.coords, s.eta)
    if src.kind is ChartKind.FINITE_XYW and target.kind is ChartKind.PLANE_X0:
        if a != 0.0:
            raise ChartSingular("state is not on the plane X = 0")
        return PhaseState(target, s.coords, s.eta)
    X, Y, Z = to_finite(src, s.coords)
    chart, coords = from_finite(target, X, Y, Z)
    return PhaseState(chart, coords, s.eta)


def state(chart: Chart | ChartKind | str, coords: Sequence[float], eta: float = 0.0) -> PhaseState:
    """Convenience constructor accepting a chart id string."""
    if isinstance(chart, str):
        chart = Chart.parse(chart)
    elif isinstance(chart, ChartKind):
        chart = Chart(chart)
    return PhaseState(chart, tuple(coords), eta)


def is_finite_triple(v: Sequence[float]) -> bool:
    return all(math.isfinite(x) for x in v)
