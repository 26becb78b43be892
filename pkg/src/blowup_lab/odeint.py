"""Adaptive Dormand-Prince 5(4) integration of chart fields.

The integrated state is (c1, c2, c3, η) in chart time τ, with dη/dτ taken
from :func:`systems.eta_rate`.  Backward runs negate the whole augmented
field, so τ always increases and events are handled identically in both
directions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NonFinite, StepUnderflow
from .params import ParamSet
from .systems import Chart, ChartKind, PhaseState, field_function

# Dormand-Prince tableau.
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
_E = (-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40)
# Dense output coefficients for θ, θ², θ³, θ⁴, one row per stage.
_P = (
    (1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432),
    (0.0, 0.0, 0.0, 0.0),
    (0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799),
    (0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072),
    (0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632),
    (0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844),
    (0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423),
)

_SAFETY = 0.9
_PI_ALPHA = 0.17
_PI_BETA = 0.04
_FAC_MIN = 0.2
_FAC_MAX = 10.0
ROOT_TOL = 1e-10


@dataclass
class IntegrationConfig:
    rtol: float = 1e-9
    atol: float = 1e-12
    max_step: float = math.inf
    max_eta: float = 1e4
    direction: str = "forward"
    max_tau: Optional[float] = None
    max_steps: int = 2_000_000
    first_step: Optional[float] = None

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if not self.max_eta > 0:
            raise ValueError("max_eta must be positive")
        if self.direction not in ("forward", "backward"):
            raise ValueError("direction must be 'forward' or 'backward'")

    @property
    def tau_budget(self) -> float:
        return self.max_tau if self.max_tau is not None else self.max_eta

    @property
    def sign(self) -> float:
        return 1.0 if self.direction == "forward" else -1.0


@dataclass
class EventSpec:
    """A scalar function of chart coordinates whose zeros are located.

    ``direction`` restricts detection to rising (+1) or falling (-1)
    crossings; ``terminal`` stops the run at the first detected root.
    """

    kind: str
    fn: Callable[[float, float, float], float]
    terminal: bool = False
    direction: int = 0
    info: dict = field(default_factory=dict)


@dataclass
class Event:
    kind: str
    eta: float
    state: PhaseState
    info: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"kind": self.kind, "eta": self.eta, "chart": self.state.chart.id,
                "coords": list(self.state.coords), **self.info}


def plane_crossing(axis: int, level: float, terminal: bool = False, direction: int = 0) -> EventSpec:
    return EventSpec("plane_crossing", lambda a, b, c: (a, b, c)[axis] - level, terminal, direction,
                     {"axis": axis, "level": level})


def proximity(point_id: str, center: Sequence[float], radius: float, terminal: bool = False) -> EventSpec:
    c0, c1, c2 = (float(v) for v in center)

    def fn(a, b, c):
        return math.sqrt((a - c0) ** 2 + (b - c1) ** 2 + (c - c2) ** 2) - radius

    return EventSpec("proximity", fn, terminal, -1, {"point_id": point_id, "radius": radius})


def coordinate_bound(axis: int, bound: float, terminal: bool = True) -> EventSpec:
    """Fires when |coordinate| reaches ``bound``."""
    return EventSpec("coordinate_bound", lambda a, b, c: abs((a, b, c)[axis]) - bound, terminal, 1,
                     {"axis": axis, "bound": bound})


def chart_handoff(axis: int, bound: float, target: str) -> EventSpec:
    spec = coordinate_bound(axis, bound, terminal=True)
    spec.kind = "chart_handoff"
    spec.info["target"] = target
    return spec


@dataclass
class Trajectory:
    """Accepted steps of one run inside a single chart."""

    chart: Chart
    direction: str
    taus: list
    points: list
    events: list
    status: str
    message: str = ""

    @property
    def etas(self) -> np.ndarray:
        return np.array([pt[3] for pt in self.points])

    @property
    def coords(self) -> np.ndarray:
        return np.array([pt[:3] for pt in self.points])

    @property
    def final(self) -> PhaseState:
        pt = self.points[-1]
        return PhaseState(self.chart, tuple(pt[:3]), pt[3])

    def states(self) -> list:
        return [PhaseState(self.chart, tuple(pt[:3]), pt[3]) for pt in self.points]


class _Dense:
    __slots__ = ("t0", "h", "y0", "K")

    def __init__(self, t0, h, y0, K):
        self.t0, self.h, self.y0, self.K = t0, h, y0, K

    def __call__(self, t):
        th = (t - self.t0) / self.h
        pw = (th, th * th, th ** 3, th ** 4)
        out = []
        for i in range(4):
            acc = 0.0
            for s in range(7):
                row = _P[s]
                q = row[0] * pw[0] + row[1] * pw[1] + row[2] * pw[2] + row[3] * pw[3]
                if q:
                    acc += self.K[s][i] * q
            out.append(self.y0[i] + self.h * acc)
        return out


def augmented_field(ps: ParamSet, chart: Chart, sign: float = 1.0):
    f = field_function(ps, chart)
    if chart.kind is ChartKind.INF_Q1:
        def rate(a, b, c):
            return c
    elif chart.kind is ChartKind.INF_Q23:
        cs = float(chart.sign)

        def rate(a, b, c):
            return cs * c
    else:
        def rate(a, b, c):
            return 1.0

    def rhs(y):
        a, b, c = y[0], y[1], y[2]
        d0, d1, d2 = f(a, b, c)
        r = rate(a, b, c)
        if sign > 0:
            return [d0, d1, d2, r]
        return [-d0, -d1, -d2, -r]

    return rhs


def _norm(err, y0, y1, rtol, atol):
    acc = 0.0
    for e, a, b in zip(err, y0, y1):
        sc = atol + rtol * max(abs(a), abs(b))
        acc += (e / sc) ** 2
    return math.sqrt(acc / len(err))


def _finite(v) -> bool:
    return all(math.isfinite(x) for x in v)


def _initial_step(rhs, y0, f0, rtol, atol, hmax):
    d0 = _norm(y0, y0, y0, rtol, atol) or 0.0
    d1 = _norm(f0, y0, y0, rtol, atol) or 0.0
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = [a + h0 * b for a, b in zip(y0, f0)]
    f1 = rhs(y1)
    if not _finite(f1):
        return min(h0, hmax)
    d2 = _norm([(a - b) for a, b in zip(f1, f0)], y0, y0, rtol, atol) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, hmax)


def _locate(dense, spec, ta, tb, ga, gb):
    """Bisection on the dense output for a root of ``spec.fn`` in [ta, tb]."""
    ya = dense(ta)
    yb = dense(tb)
    while tb - ta > ROOT_TOL and abs(yb[3] - ya[3]) > ROOT_TOL:
        tm = 0.5 * (ta + tb)
        ym = dense(tm)
        gm = spec.fn(ym[0], ym[1], ym[2])
        if (gm > 0) == (ga > 0) and gm != 0:
            ta, ga, ya = tm, gm, ym
        else:
            tb, gb, yb = tm, gm, ym
    return tb, yb


def _crossed(spec, ga, gb) -> bool:
    if ga == 0 or not (math.isfinite(ga) and math.isfinite(gb)):
        return False
    if (ga < 0) == (gb < 0) and gb != 0:
        return False
    if spec.direction > 0:
        return ga < 0
    if spec.direction < 0:
        return ga > 0
    return True


def integrate(ps: ParamSet, start: PhaseState, cfg: IntegrationConfig | None = None,
              events: Sequence[EventSpec] = (),
              monitor: Callable[[float, list], Optional[str]] | None = None) -> Trajectory:
    """Integrate from ``start`` until max_eta, a terminal event, or a monitor stop.

    ``monitor(tau, y)`` is called after each accepted step with the
    augmented state; a non-empty return value stops the run and becomes
    the trajectory status.  StepUnderflow and NonFinite carry the partial
    trajectory in their ``partial`` attribute.
    """
    cfg = cfg or IntegrationConfig()
    chart = start.chart
    rhs = augmented_field(ps, chart, cfg.sign)
    eta0 = float(start.eta)
    y = [float(v) for v in start.coords] + [eta0]
    if not _finite(y):
        raise NonFinite("start state is not finite")
    t = 0.0
    taus, points, found = [t], [list(y)], []
    traj = Trajectory(chart, cfg.direction, taus, points, found, "running")
    f0 = rhs(y)
    if not _finite(f0):
        raise NonFinite("field is not finite at the start state")
    if all(v == 0.0 for v in f0[:3]):
        traj.status = "max_eta"
        traj.message = "start is an equilibrium"
        return traj
    hmax = cfg.max_step
    h = cfg.first_step or _initial_step(rhs, y, f0, cfg.rtol, cfg.atol, hmax)
    tau_end = cfg.tau_budget
    g_prev = [e.fn(y[0], y[1], y[2]) for e in events]
    err_prev = 1e-4
    steps = 0
    rtol, atol = cfg.rtol, cfg.atol
    while True:
        if abs(y[3] - eta0) >= cfg.max_eta:
            traj.status = "max_eta"
            return traj
        if t >= tau_end:
            traj.status = "max_tau" if chart.at_infinity else "max_eta"
            return traj
        if steps >= cfg.max_steps:
            traj.status = "max_steps"
            return traj
        h_floor = 1e-14 * max(1.0, abs(t))
        h = min(h, hmax, max(tau_end - t, h_floor))
        while True:
            if h < h_floor:
                traj.status = "step_underflow"
                exc = StepUnderflow(f"step size fell below {h_floor:.3e} at tau={t:.6g}")
                exc.partial = traj
                raise exc
            K = [f0]
            ok = True
            for s in range(1, 6):
                a = _A[s]
                ys = [y[i] + h * sum(a[j] * K[j][i] for j in range(s)) for i in range(4)]
                k = rhs(ys)
                if not _finite(k):
                    ok = False
                    break
                K.append(k)
            if ok:
                y_new = [y[i] + h * sum(_B[j] * K[j][i] for j in range(6)) for i in range(4)]
                f_new = rhs(y_new)
                ok = _finite(y_new) and _finite(f_new)
            if not ok:
                h *= 0.25
                if h < h_floor:
                    traj.status = "non_finite"
                    exc = NonFinite(f"overflow near tau={t:.6g}")
                    exc.partial = traj
                    raise exc
                continue
            K.append(f_new)
            err_vec = [h * sum(_E[j] * K[j][i] for j in range(7)) for i in range(4)]
            err = _norm(err_vec, y, y_new, rtol, atol)
            if err <= 1.0:
                break
            h *= max(_FAC_MIN, _SAFETY * err ** -0.2)
        steps += 1
        dense = _Dense(t, h, y, K)
        t_new = t + h
        hit = None
        step_events = []
        for idx, spec in enumerate(events):
            g_new = spec.fn(y_new[0], y_new[1], y_new[2])
            if _crossed(spec, g_prev[idx], g_new):
                t_root, y_root = _locate(dense, spec, t, t_new, g_prev[idx], g_new)
                if hit is None or t_root < hit[0]:
                    if spec.terminal:
                        hit = (t_root, y_root, spec)
                ev = Event(spec.kind, y_root[3], PhaseState(chart, tuple(y_root[:3]), y_root[3]),
                           dict(spec.info, tau=t_root))
                step_events.append(ev)
            g_prev[idx] = g_new
        step_events.sort(key=lambda e: e.info["tau"])
        if hit is not None:
            t_root, y_root, spec = hit
            # Events beyond the terminal root never happened.
            found.extend(e for e in step_events if e.info["tau"] <= t_root)
            taus.append(t_root)
            points.append(list(y_root))
            traj.status = "terminal_event"
            traj.message = spec.kind
            return traj
        found.extend(step_events)
        fac = err_prev ** _PI_BETA / max(err, 1e-10) ** _PI_ALPHA * _SAFETY
        fac = min(_FAC_MAX, max(_FAC_MIN, fac))
        err_prev = max(err, 1e-4)
        t, y, f0 = t_new, y_new, f_new
        taus.append(t)
        points.append(list(y))
        h *= fac
        if monitor is not None:
            stop = monitor(t, y)
            if stop:
                traj.status = stop
                return traj
