"""Orbit seeding, chart handoffs and fate classification.

An orbit is integrated as a chain of single-chart segments.  A handoff
moves the state into the chart where its coordinates are moderate; the
finite chart is used while X < X_hand and |Y| < Y_hand.  Fates are decided
by :class:`FateTracker`, which is fed one sample at a time both during the
run (to stop early) and when re-classifying a stored orbit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import critical
from .errors import NonFinite, OutOfRange, StepUnderflow
from .odeint import (Event, EventSpec, IntegrationConfig, Trajectory, chart_handoff,
                     coordinate_bound, integrate)
from .params import ParamSet, derive
from .systems import (FINITE, INF_Q1, PLANE_X0, Chart, ChartKind, PhaseState, from_finite,
                      to_finite)

FORWARD_MAX_ETA = 1e6


class FateKind(str, enum.Enum):
    ENTERS_P1 = "Enters_P1"
    ENTERS_PGAMMA0 = "Enters_Pgamma0"
    ENTERS_Q3 = "Enters_Q3"
    ENTERS_Q4_P1 = "Enters_Q4_p1"
    FROM_Q5 = "Comes_from_Q5"
    FROM_Q2 = "Comes_from_Q2"
    FROM_Q1 = "Comes_from_Q1"
    FROM_P0 = "Comes_from_P0"
    FROM_P2 = "Comes_from_P2"
    UNRESOLVED = "Escape_unresolved"


@dataclass
class Fate:
    kind: FateKind
    diagnostics: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "diagnostics": self.diagnostics, "flags": list(self.flags)}


@dataclass
class ManifoldSeed:
    """Starting state near an equilibrium, with the direction used to leave it."""

    point_id: str
    direction: tuple
    kind: str
    offset: float
    state: PhaseState
    integrate: str = "forward"
    label: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"point": self.point_id, "direction": list(self.direction), "kind": self.kind,
                "offset": self.offset, "chart": self.state.chart.id,
                "coords": list(self.state.coords), "integrate": self.integrate, **self.label}


@dataclass
class FateConfig:
    """Thresholds of the fate classifier.

    Dwell times are measured in chart time, which coincides with η in the
    finite chart and keeps advancing near points at infinity where η
    converges.
    """

    delta: float = 1e-4
    dwell: float = 1.0
    delta_q1: float = 1e-3
    z_q4: float = 1e3
    delta_q4: float = 1e-2
    x_hand: float = 1e3
    y_hand: float = 1e3
    max_handoffs: int = 500
    detect_p1: bool = True
    axis_transit: bool = True
    axis_enter: float = 1e-5
    axis_exit: float = 1e-4
    axis_slaving: float = 1e-2
    axis_theta_max: float = 1e4
    axis_floor: float = -600.0


def _unit(v) -> tuple:
    v = np.asarray(v, dtype=float)
    return tuple(v / np.linalg.norm(v))


# ---------------------------------------------------------------- seeds


def seed_from_P2(ps: ParamSet, eps: float = 1e-6) -> ManifoldSeed:
    base = np.array(critical.p2_coords(ps))
    e3 = critical.p2_e3(ps)
    if e3[2] < 0:
        e3 = -e3
    d = np.array(_unit(e3))
    st = PhaseState(FINITE, tuple(base + eps * d))
    return ManifoldSeed("P2", tuple(d), "unstable_eigvec", eps, st)


def seed_from_P0(ps: ParamSet, K: float, eps: float = 1e-5) -> ManifoldSeed:
    """Seed on the center manifold of P0 along the family Z ≈ K X."""
    if not K > 0:
        raise OutOfRange("K must be positive")
    X, Z = eps, K * eps
    Y = critical.center_manifold_P0_Y(ps, X, Z)
    return ManifoldSeed("P0", _unit((X, Y, Z)), "center_expansion", eps,
                        PhaseState(FINITE, (X, Y, Z)), label={"K": K})


def q1_seed_coords(ps: ParamSet, c: float, eps: float) -> tuple:
    """(y, z, w) on the unstable manifold of Q1, one expression for every sign of σ."""
    _, _, N, s = ps.as_tuple()
    w = eps
    z = c * w ** ((s + 2) / 2)
    y = w / N - z / (N + s)
    return (y, z, w)


def seed_from_Q1(ps: ParamSet, c: float, eps: float = 1e-6) -> ManifoldSeed:
    if ps.N < 2:
        raise OutOfRange("the Q1 unstable family is seeded for N >= 2")
    if c < 0:
        raise OutOfRange("c must be nonnegative")
    yzw = q1_seed_coords(ps, c, eps)
    XYZ = to_finite(INF_Q1, yzw)
    return ManifoldSeed("Q1", _unit(yzw), "unstable_eigvec", eps, PhaseState(FINITE, XYZ),
                        label={"c": c})


def seed_backward_from_P1(ps: ParamSet, theta: float, eps: float = 1e-9) -> ManifoldSeed:
    """Seed on the stable manifold of P1 for backward integration.

    ``theta`` compactifies the family Z = K X^q, q = (p-1)/(m-1), via
    K = tan θ.  The seed sits at X = eps on the member with that K, with a
    first-order correction in Y and Z.  θ = π/2 uses the X = 0 plane of the
    W = XZ chart.
    """
    if not 0 <= theta <= math.pi / 2:
        raise OutOfRange("theta must lie in [0, pi/2]")
    d = derive(ps)
    m, p, N, s = ps.as_tuple()
    a, b = float(d.alpha), float(d.beta)
    ba = b / a
    P1 = (0.0, -ba, 0.0)
    if math.pi / 2 - theta < 1e-15:
        v1 = 1.0 / ((m + p - 1) * ba)
        coords = (0.0, -ba + eps * v1, eps)
        st = PhaseState(PLANE_X0, coords)
        return ManifoldSeed("P1", _unit((0.0, v1, 1.0)), "stable_eigvec", eps, st, "backward",
                            {"theta": theta, "K": math.inf})
    K = math.tan(theta)
    q = (p - 1) / (m - 1)
    Zb = K * eps ** q
    v2 = -(a + N * b - a * Zb) / (m * b)
    if m == p:
        v3 = 0.0
    else:
        v3 = (s * Zb + (p - 1) * Zb * v2) / (-(m - p) * ba)
    coords = (eps, -ba + eps * v2, Zb + eps * v3)
    st = PhaseState(FINITE, coords)
    direction = _unit(np.subtract(coords, P1))
    return ManifoldSeed("P1", direction, "stable_eigvec", eps, st, "backward",
                        {"theta": theta, "K": K})


# ---------------------------------------------------------------- fates


def _dist(a, b) -> float:
    return math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2)


class FateTracker:
    """Incremental classifier fed with (chart, τ, coordinates) samples."""

    def __init__(self, ps: ParamSet, direction: str = "forward", cfg: FateConfig | None = None):
        self.ps = ps
        self.direction = direction
        self.cfg = cfg or FateConfig()
        d = derive(ps)
        self.m, self.p, self.N, self.s = ps.as_tuple()
        self.ba = float(d.beta / d.alpha)
        self.Y0 = float(d.Y0)
        self.g0 = float(d.gamma0) if not ps.p_is_one else math.inf
        self.P1 = (0.0, -self.ba, 0.0)
        self.P2 = critical.p2_coords(ps)
        self.Q5 = (-(self.N - 2) / self.m, 0.0, 0.0)
        self.fate: Optional[Fate] = None
        self._timers: dict = {}
        self.min_dist_P1 = math.inf
        self.min_dist_P1_eta = math.nan
        self.crossed_no_return = False
        self.no_return_eta = math.nan
        self.rebound_after_crossing = False
        self.y_sign_changes = 0
        self._y_sign = 0
        self._y_last = math.nan
        self.q4_veto = False
        self.last = None

    # dwell bookkeeping
    def _dwell(self, key: str, inside: bool, tau: float) -> bool:
        if not inside:
            self._timers.pop(key, None)
            return False
        t0 = self._timers.setdefault(key, tau)
        return tau - t0 >= self.cfg.dwell

    def _set(self, kind: FateKind, eta: float, **diag) -> Fate:
        diag = dict(diag, eta=eta)
        self.fate = Fate(kind, diag)
        return self.fate

    def _track_y(self, Y: float, eta: float) -> None:
        if Y != 0 and math.isfinite(Y):
            sg = 1 if Y > 0 else -1
            if self._y_sign and sg != self._y_sign:
                self.y_sign_changes += 1
            self._y_sign = sg
        if self.crossed_no_return and math.isfinite(self._y_last) and Y > -self.Y0:
            self.rebound_after_crossing = True
        if (not self.crossed_no_return and math.isfinite(self._y_last)
                and self._y_last >= -self.Y0 > Y):
            self.crossed_no_return = True
            self.no_return_eta = eta
        self._y_last = Y

    def update(self, chart: Chart, tau: float, a: float, b: float, c: float, eta: float) -> Optional[Fate]:
        if self.fate is not None:
            return self.fate
        self.last = (chart, (a, b, c), eta)
        kind = chart.kind
        cfg = self.cfg
        fwd = self.direction == "forward"
        if kind is ChartKind.PLANE_X0:
            if not fwd and b >= cfg.y_hand:
                return self._set(FateKind.FROM_Q2, eta, chart=chart.id)
            return None
        if kind is ChartKind.FINITE_XYZ:
            X, Y, Z = a, b, c
        elif kind is ChartKind.INF_Q1:
            Y = a / c if c else math.copysign(math.inf, a)
            X, Z = math.inf, math.nan
        elif kind is ChartKind.INF_Q23:
            Y = 1.0 / c if c else chart.sign * math.inf
            X, Z = math.nan, math.nan
        else:
            X, Y, Z = to_finite(chart, (a, b, c))
        self._track_y(Y, eta)
        if kind is ChartKind.FINITE_XYZ:
            if self.ps.p_is_one:
                dP1 = math.hypot(X, Y + self.ba)
            else:
                dP1 = _dist((X, Y, Z), self.P1)
            if dP1 < self.min_dist_P1:
                self.min_dist_P1, self.min_dist_P1_eta = dP1, eta
            if fwd:
                return self._forward_finite(X, Y, Z, tau, eta, dP1)
            return self._backward_finite(X, Y, Z, tau, eta)
        if kind is ChartKind.INF_Q23:
            origin = math.sqrt(a * a + b * b + c * c)
            if fwd and chart.sign < 0:
                if self._dwell("Q3", origin < cfg.delta, tau):
                    if self.crossed_no_return or self._start_below:
                        return self._set(FateKind.ENTERS_Q3, eta, distance=origin,
                                         no_return_eta=self.no_return_eta,
                                         rebound_after_crossing=self.rebound_after_crossing)
            if not fwd and chart.sign > 0:
                if self._dwell("Q2", origin < cfg.delta, tau):
                    return self._set(FateKind.FROM_Q2, eta, distance=origin)
            return None
        if kind is ChartKind.INF_Q1 and not fwd:
            d5 = _dist((a, b, c), self.Q5)
            if self.N != 2 and self._dwell("Q5", d5 < cfg.delta, tau):
                return self._set(FateKind.FROM_Q5, eta, distance=d5)
            d1 = math.sqrt(a * a + b * b + c * c)
            if self._dwell("Q1", d1 < cfg.delta_q1, tau):
                fate = self._set(FateKind.FROM_Q1, eta, distance=d1)
                if self.N == 2:
                    fate.flags.append("Q5_merged_into_Q1")
                return fate
        return None

    _start_below = False

    def start(self, chart: Chart, coords, eta: float) -> None:
        try:
            Y = to_finite(chart, coords)[1]
        except Exception:
            Y = coords[1]
        self._start_below = Y < -self.Y0
        self._y_last = Y

    def _forward_finite(self, X, Y, Z, tau, eta, dP1):
        cfg = self.cfg
        if not self.ps.p_is_one:
            dg = _dist((X, Y, Z), (0.0, 0.0, self.g0))
            inside = dg < cfg.delta
            if self._dwell("Pgamma0", inside, tau):
                return self._set(FateKind.ENTERS_PGAMMA0, eta, distance=dg,
                                 y_sign_changes=self.y_sign_changes)
            inside = dP1 < cfg.delta
        else:
            inside = dP1 < cfg.delta and Z >= 0
        if self._dwell("P1", inside and cfg.detect_p1, tau):
            fate = self._set(FateKind.ENTERS_P1, eta, distance=dP1, min_dist_P1=self.min_dist_P1)
            if self.ps.p_is_one:
                fate.diagnostics["gamma"] = Z
                if Z >= cfg.delta:
                    fate.flags.append("P1gamma")
            return fate
        if Z == 0.0 and self._dwell("P2", _dist((X, Y, Z), self.P2) < cfg.delta, tau):
            # P2 attracts within the invariant plane, which no forward fate covers
            return self._set(FateKind.UNRESOLVED, eta, reason="settles_at_P2_in_plane_Z0")
        if Z >= cfg.z_q4 and abs(X) < cfg.delta_q4 and abs(Y) < cfg.delta_q4:
            if self.ps.p_is_one:
                return self._set(FateKind.ENTERS_Q4_P1, eta, Z=Z, X=X, Y=Y)
            self.q4_veto = True
            fate = self._set(FateKind.UNRESOLVED, eta, reason="q4_signature_for_p_gt_1", Z=Z)
            fate.flags.append("q4_veto")
            return fate
        return None

    def _backward_finite(self, X, Y, Z, tau, eta):
        cfg = self.cfg
        d0 = _dist((X, Y, Z), (0.0, 0.0, 0.0))
        if self._dwell("P0", d0 < cfg.delta, tau):
            return self._set(FateKind.FROM_P0, eta, distance=d0)
        d2 = _dist((X, Y, Z), self.P2)
        if self._dwell("P2", d2 < cfg.delta, tau):
            return self._set(FateKind.FROM_P2, eta, distance=d2)
        return None

    def finish(self, status: str, message: str = "") -> Fate:
        if self.fate is None:
            diag = {"reason": status}
            if message:
                diag["message"] = message
            if self.last is not None:
                chart, coords, eta = self.last
                diag.update(chart=chart.id, coords=list(coords), eta=eta)
            self.fate = Fate(FateKind.UNRESOLVED, diag)
        d = self.fate.diagnostics
        d.setdefault("min_dist_P1", self.min_dist_P1)
        d.setdefault("min_dist_P1_eta", self.min_dist_P1_eta)
        d.setdefault("y_sign_changes", self.y_sign_changes)
        d.setdefault("crossed_no_return", self.crossed_no_return)
        d["delta_fate"] = self.cfg.delta
        return self.fate


# ---------------------------------------------------------------- orbits


@dataclass
class Orbit:
    """Chain of chart segments with the assigned fate.

    Samples are strictly monotone in η along the integration direction
    (increasing forward, decreasing backward).
    """

    segments: list
    events: list
    fate: Optional[Fate]
    seed: Optional[ManifoldSeed]
    direction: str = "forward"

    @property
    def samples(self) -> list:
        out = []
        for k, seg in enumerate(self.segments):
            pts = seg.points if k == 0 else seg.points[1:]
            out.extend((pt[3], PhaseState(seg.chart, tuple(pt[:3]), pt[3])) for pt in pts)
        return out

    def table(self) -> tuple:
        """(etas, chart ids, chart coords) as arrays, one row per sample."""
        etas, charts, coords = [], [], []
        for k, seg in enumerate(self.segments):
            pts = seg.points if k == 0 else seg.points[1:]
            for pt in pts:
                etas.append(pt[3])
                charts.append(seg.chart.id)
                coords.append(pt[:3])
        return np.array(etas), charts, np.array(coords, dtype=float).reshape(-1, 3)

    def finite(self) -> tuple:
        """(etas, XYZ) for the samples that have a finite-chart image."""
        etas, out = [], []
        for k, seg in enumerate(self.segments):
            pts = seg.points if k == 0 else seg.points[1:]
            for pt in pts:
                try:
                    xyz = to_finite(seg.chart, pt[:3])
                except Exception:
                    continue
                etas.append(pt[3])
                out.append(xyz)
        return np.array(etas), np.array(out, dtype=float).reshape(-1, 3)

    def finite_segment_samples(self) -> tuple:
        """(etas, XYZ) restricted to samples integrated in the finite chart."""
        etas, out = [], []
        for k, seg in enumerate(self.segments):
            if seg.chart.kind is not ChartKind.FINITE_XYZ:
                continue
            pts = seg.points if k == 0 or out == [] else seg.points[1:]
            for pt in pts:
                etas.append(pt[3])
                out.append(pt[:3])
        return np.array(etas), np.array(out, dtype=float).reshape(-1, 3)

    @property
    def final(self) -> PhaseState:
        return self.segments[-1].final

    def to_json(self) -> dict:
        return {"seed": self.seed.to_json() if self.seed else None,
                "direction": self.direction,
                "fate": self.fate.to_json() if self.fate else None,
                "events": [e.to_json() for e in self.events],
                "segments": [{"chart": s.chart.id, "status": s.status, "n": len(s.points)}
                             for s in self.segments]}


def settle(state: PhaseState, cfg: FateConfig | None = None) -> PhaseState:
    """Move ``state`` into the chart where its coordinates are moderate."""
    cfg = cfg or FateConfig()
    if state.chart.kind in (ChartKind.PLANE_X0, ChartKind.PLANE_Z0, ChartKind.FINITE_XYW):
        return state
    X, Y, Z = to_finite(state.chart, state.coords)
    if X < cfg.x_hand and abs(Y) < cfg.y_hand:
        target = FINITE
    elif abs(Y) < 10 * X:
        target = INF_Q1
    else:
        target = Chart(ChartKind.INF_Q23, 1 if Y > 0 else -1)
    if target == state.chart:
        return state
    if state.chart.at_infinity and target.at_infinity:
        from .systems import transform
        return transform(state, target)
    chart, coords = from_finite(target, X, Y, Z)
    return PhaseState(chart, coords, state.eta)


def _events_for(chart: Chart, cfg: FateConfig, Y0: float) -> list:
    kind = chart.kind
    if kind is ChartKind.FINITE_XYZ:
        return [chart_handoff(0, cfg.x_hand, "inf"), chart_handoff(1, cfg.y_hand, "inf"),
                EventSpec("plane_crossing", lambda a, b, c: b + Y0, False, -1,
                          {"axis": 1, "level": -Y0, "name": "no_return"})]
    if kind is ChartKind.INF_Q1:
        return [EventSpec("chart_handoff", lambda a, b, c: c - 10.0 / cfg.x_hand, True, 1,
                          {"axis": 2, "bound": 10.0 / cfg.x_hand, "target": "finite"}),
                chart_handoff(0, 10.0, "Q23"),
                EventSpec("plane_crossing", lambda a, b, c: a + Y0 * c, False, -1,
                          {"axis": 1, "level": -Y0, "name": "no_return"})]
    if kind is ChartKind.INF_Q23:
        return [chart_handoff(2, 10.0 / cfg.y_hand, "finite"), chart_handoff(0, 10.0, "Q1")]
    if kind is ChartKind.PLANE_X0:
        return [coordinate_bound(1, cfg.y_hand, terminal=True)]
    return []


def run_orbit(ps: ParamSet, seed: ManifoldSeed | PhaseState, cfg: IntegrationConfig | None = None,
              fate_cfg: FateConfig | None = None, direction: str | None = None) -> Orbit:
    """Integrate from a seed through chart handoffs until a fate is reached.

    ``cfg.max_eta`` bounds the η covered by full-field segments; axis
    transits (see :func:`axis_transit`) are exempt because η grows like
    1/X there.
    """
    fate_cfg = fate_cfg or FateConfig()
    if isinstance(seed, ManifoldSeed):
        start, sd = seed.state, seed
        direction = direction or seed.integrate
    else:
        start, sd = seed, None
        direction = direction or "forward"
    if cfg is None:
        cfg = IntegrationConfig(max_eta=FORWARD_MAX_ETA)
    cfg = replace(cfg, direction=direction)
    Y0 = float(derive(ps).Y0)
    ba = float(derive(ps).beta / derive(ps).alpha)
    tracker = FateTracker(ps, direction, fate_cfg)
    state = settle(start, fate_cfg)
    tracker.start(state.chart, state.coords, state.eta)
    eta_used = 0.0
    tau_off = 0.0
    segments: list[Trajectory] = []
    events: list[Event] = []
    handoffs = transits = 0
    status, message = "max_eta", ""
    while True:
        eta_left = cfg.max_eta - eta_used
        tau_left = cfg.tau_budget - tau_off
        if eta_left <= 0 or tau_left <= 0:
            status = "max_eta" if eta_left <= 0 else "max_tau"
            break
        sub = replace(cfg, max_eta=eta_left, max_tau=tau_left)
        chart = state.chart
        offset = tau_off
        watch_axis = fate_cfg.axis_transit and chart.kind is ChartKind.FINITE_XYZ

        def monitor(tau, y, chart=chart, offset=offset, watch_axis=watch_axis):
            f = tracker.update(chart, offset + tau, y[0], y[1], y[2], y[3])
            if f is not None:
                return "fate"
            if watch_axis and _near_axis(y[0], y[1], y[2], ba, fate_cfg, cfg.atol):
                return "axis"
            return None

        try:
            traj = integrate(ps, state, sub, _events_for(chart, fate_cfg, Y0), monitor)
        except (StepUnderflow, NonFinite) as exc:
            traj = exc.partial
            status, message = traj.status, str(exc)
            segments.append(traj)
            events.extend(traj.events)
            break
        segments.append(traj)
        events.extend(traj.events)
        tau_off += traj.taus[-1]
        eta_used += abs(traj.points[-1][3] - traj.points[0][3])
        state = traj.final
        if tracker.fate is not None:
            status = "fate"
            break
        if traj.status == "axis":
            seg = axis_transit(ps, state, direction, tracker, tau_off, fate_cfg)
            segments.append(seg)
            transits += 1
            tau_off += seg.taus[-1]
            state = seg.final
            if tracker.fate is not None:
                status = "fate"
                break
            if seg.status != "axis_exit" or transits > fate_cfg.max_handoffs:
                status, message = seg.status, seg.message
                break
            continue
        if traj.status == "terminal_event":
            if chart.kind is ChartKind.PLANE_X0:
                tracker.update(chart, tau_off, *state.coords, state.eta)
                status = "fate"
                break
            handoffs += 1
            if handoffs > fate_cfg.max_handoffs:
                status = "too_many_handoffs"
                break
            try:
                state = _handoff(state, fate_cfg)
            except Exception as exc:  # chart singular at a handoff
                status, message = "handoff_failed", str(exc)
                break
            continue
        status, message = traj.status, traj.message
        break
    fate = tracker.finish(status, message)
    fate.diagnostics["handoffs"] = handoffs
    fate.diagnostics["axis_transits"] = transits
    return Orbit(segments, events, fate, sd, direction)


def _near_axis(X, Y, Z, ba, cfg: FateConfig, atol: float = 0.0) -> bool:
    """Close to the line of equilibria {X = Y = 0} and relaxed onto its slow manifold.

    The slaving test allows for the integrator's absolute tolerance, which
    dominates once X is comparable to atol.
    """
    if not (0 < X < cfg.axis_enter) or Z < 0:
        return False
    return abs(Y - X * (1 - Z) / ba) <= cfg.axis_slaving * X + 100 * atol


def axis_transit(ps: ParamSet, state: PhaseState, direction: str, tracker: FateTracker,
                 tau_off: float, cfg: FateConfig) -> Trajectory:
    """Follow the slow manifold Y = X(1 - Z)α/β along the axis {X = Y = 0}.

    In the time dθ = X dη the reduced flow reads

        d(ln X)/dθ = (m-1)(1-Z)α/β - 2,   dZ/dθ = Z[(p-1)(1-Z)α/β + σ],

    which is non-stiff, while the full field in η is stiff there.  The
    transit stops when X reaches ``cfg.axis_exit`` or the tracker decides.
    """
    from scipy.integrate import solve_ivp

    m, p, _, s = ps.as_tuple()
    d = derive(ps)
    ab = float(d.alpha / d.beta)
    sg = 1.0 if direction == "forward" else -1.0
    X0, _, Z0 = state.coords
    eta0 = state.eta
    u_exit = math.log(cfg.axis_exit)

    def rhs(t, v):
        u, Z, _ = v
        g = (1 - Z) * ab
        return [sg * ((m - 1) * g - 2), sg * Z * ((p - 1) * g + s), sg * math.exp(-u)]

    def leave(t, v):
        return v[0] - u_exit

    def floor(t, v):
        return v[0] - cfg.axis_floor

    leave.terminal = floor.terminal = True
    leave.direction, floor.direction = 1, -1

    taus, points = [0.0], [[X0, X0 * (1 - Z0) * ab, Z0, eta0]]
    traj = Trajectory(FINITE, direction, taus, points, [], "axis_transit")
    v = [math.log(X0), Z0, eta0]
    theta, chunk = 0.0, 1.0
    while theta < cfg.axis_theta_max:
        sol = solve_ivp(rhs, (theta, theta + chunk), v, method="RK45", rtol=1e-10, atol=1e-12,
                        events=(leave, floor))
        for k in range(1, sol.t.size):
            u, Z, eta = sol.y[:, k]
            X = math.exp(u)
            pt = [X, X * (1 - Z) * ab, float(Z), eta]
            taus.append(abs(eta - eta0))
            points.append(pt)
            eta = float(eta)
            pt[3] = eta
            if tracker.update(FINITE, tau_off + taus[-1], pt[0], pt[1], pt[2], eta) is not None:
                traj.status = "fate"
                return traj
        v = list(sol.y[:, -1])
        theta = sol.t[-1]
        if sol.status == 1 and sol.t_events[0].size:
            traj.status = "axis_exit"
            return traj
        if not sol.success:
            traj.status, traj.message = "axis_failed", sol.message
            return traj
        floored = sol.status == 1 and sol.t_events[1].size > 0
        if floored or v[0] <= cfg.axis_floor or not math.isfinite(v[2]):
            if ps.p_is_one and s > 0 and sg > 0 and v[1] > 0:
                # X has underflowed; on the axis dZ/dθ = σZ exactly, so Z grows without bound
                Zq = max(float(v[1]), tracker.cfg.z_q4)
                eta = float(v[2]) if math.isfinite(v[2]) else points[-1][3]
                taus.append(taus[-1] + math.log(Zq / v[1]) / s)
                points.append([0.0, 0.0, Zq, eta])
                traj.message = "Z continued along the axis"
                if tracker.update(FINITE, tau_off + taus[-1], 0.0, 0.0, Zq, eta) is not None:
                    traj.status = "fate"
                    return traj
            elif not ps.p_is_one and sg > 0 and v[1] > 0 and math.isfinite(v[2]):
                # logistic dZ/dθ = bZ(γ0 - Z) on the axis; η grows at least e^{-floor} per unit θ
                g0 = float(d.gamma0)
                b = (p - 1) * ab
                c = g0 / float(v[1]) - 1
                th1 = max(0.0, math.log(10 * g0 * abs(c) / cfg.delta) / (b * g0)) if c else 0.0
                rate = math.exp(-cfg.axis_floor)
                eta = float(v[2])
                for dth in (th1, th1 + 2 * cfg.dwell):
                    Zt = g0 / (1 + c * math.exp(-b * g0 * dth))
                    points.append([0.0, 0.0, Zt, eta + rate * dth])
                    taus.append(abs(points[-1][3] - eta0))
                    if tracker.update(FINITE, tau_off + taus[-1], 0.0, 0.0, Zt, points[-1][3]) is not None:
                        traj.message = "Z continued along the axis"
                        traj.status = "fate"
                        return traj
            traj.status = "axis_converged"
            return traj
    traj.status = "axis_theta_budget"
    return traj


def _handoff(state: PhaseState, cfg: FateConfig) -> PhaseState:
    new = settle(state, cfg)
    if new.chart == state.chart:
        # hysteresis band: force the move indicated by the event
        X, Y, Z = to_finite(state.chart, state.coords)
        if state.chart.kind is ChartKind.FINITE_XYZ:
            target = INF_Q1 if abs(Y) < 10 * X else Chart(ChartKind.INF_Q23, 1 if Y > 0 else -1)
        elif state.chart.kind is ChartKind.INF_Q1:
            target = Chart(ChartKind.INF_Q23, 1 if Y > 0 else -1) if abs(Y) >= 10 * X else FINITE
        else:
            target = INF_Q1 if X >= 10 * abs(Y) else FINITE
        if state.chart.at_infinity and target.at_infinity:
            from .systems import transform
            return transform(state, target)
        chart, coords = from_finite(target, X, Y, Z)
        return PhaseState(chart, coords, state.eta)
    return new


def classify(orbit: Orbit, ps: ParamSet, cfg: FateConfig | None = None) -> Fate:
    """Replay the stored samples through a fresh tracker."""
    tracker = FateTracker(ps, orbit.direction, cfg)
    first = True
    tau_off = 0.0
    for k, seg in enumerate(orbit.segments):
        if first:
            tracker.start(seg.chart, seg.points[0][:3], seg.points[0][3])
            first = False
        for j, (tau, pt) in enumerate(zip(seg.taus, seg.points)):
            if j == 0:
                continue
            if tracker.update(seg.chart, tau_off + tau, pt[0], pt[1], pt[2], pt[3]) is not None:
                break
        tau_off += seg.taus[-1]
        if tracker.fate is not None:
            break
        if seg.chart.kind is ChartKind.PLANE_X0 and seg.status == "terminal_event":
            pt = seg.points[-1]
            tracker.update(seg.chart, tau_off, pt[0], pt[1], pt[2], pt[3])
    status = orbit.segments[-1].status if orbit.segments else "empty"
    return tracker.finish(status)


def forward_from_P2(ps: ParamSet, cfg: IntegrationConfig | None = None,
                    fate_cfg: FateConfig | None = None, eps: float = 1e-6) -> Orbit:
    return run_orbit(ps, seed_from_P2(ps, eps), cfg, fate_cfg)
