"""Profiles f(ξ) recovered from phase-space orbits, local-behavior fits and u(x, t).

The finite chart is related to the profile by

    X = (m/α) ξ^{-2} f^{m-1},   Y = (m/α) ξ^{-1} f^{m-2} f',   Z = (1/α) ξ^σ f^{p-1},

and dη = dξ/(ξ X).  Taking logarithms, (ln ξ, ln f) solve a 2×2 linear
system whose determinant is -L, so the inversion is explicit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import NoModelFits, OutOfRange, ReconstructFailed
from .params import ParamSet, derive
from .systems import FINITE, field_function

LOG_LIMIT = 700.0
FIT_TOL = 0.05
MIN_WINDOW = 20
MIN_SPAN = 2.0


class BehaviorKind(str, enum.Enum):
    Q1_POSITIVE = "Q1_positive"
    P2_TYPE = "P2_type"
    P0_TYPE = "P0_type"
    INTERFACE = "Interface"
    TAIL_GAMMA0 = "Tail_gamma0"
    TAIL_Q4_P1 = "Tail_Q4_p1"
    Q5_ASYMPTOTE = "Q5_asymptote"
    Q1_LOG_N2 = "Q1_log_N2"
    Q5_N1 = "Q5_N1"


@dataclass
class ProfileCurve:
    """Samples of a profile with ξ strictly increasing.

    ``log_xi`` and ``log_f`` are kept next to ``xi`` and ``f`` because tails
    span hundreds of decades; ``xyz`` holds the phase-space samples.
    """

    ps: ParamSet
    xi: np.ndarray
    f: np.ndarray
    fprime: np.ndarray
    log_xi: np.ndarray
    log_f: np.ndarray
    xyz: np.ndarray
    source: str = ""

    def __len__(self) -> int:
        return int(self.xi.size)

    def rows(self) -> list:
        return [(float(a), float(b), float(c)) for a, b, c in zip(self.xi, self.f, self.fprime)]


@dataclass
class BehaviorFit:
    kind: BehaviorKind
    constants: dict
    residual: float
    window: tuple
    n: int
    exponent: Optional[float] = None
    expected: dict = field(default_factory=dict)
    candidates: dict = field(default_factory=dict)
    end: str = ""

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "end": self.end, "constants": self.constants, "residual": self.residual,
                "window": list(self.window), "n": self.n, "exponent": self.exponent,
                "expected": self.expected, "candidates": self.candidates}


# ------------------------------------------------------------ change of variables


def _consts(ps: ParamSet) -> tuple:
    d = derive(ps)
    m, p, N, s = ps.as_tuple()
    return m, p, N, s, float(d.alpha), float(d.beta)


def phase_from_profile(ps: ParamSet, xi, f, fprime) -> tuple:
    """(X, Y, Z) of profile samples."""
    m, p, N, s, a, b = _consts(ps)
    xi, f, fprime = (np.asarray(v, dtype=float) for v in (xi, f, fprime))
    X = m / a * xi ** -2 * f ** (m - 1)
    Y = m / a / xi * f ** (m - 2) * fprime
    Z = xi ** s * f ** (p - 1) / a
    return X, Y, Z


def _log_solve(ps: ParamSet, X, Z) -> tuple:
    m, p, N, s, a, b = _consts(ps)
    r1 = np.log(X) - math.log(m / a)
    r2 = np.log(Z) + math.log(a)
    det = -2 * (p - 1) - s * (m - 1)
    return ((p - 1) * r1 - (m - 1) * r2) / det, (-s * r1 - 2 * r2) / det


def reconstruct_xyz(ps: ParamSet, xyz, source: str = "") -> ProfileCurve:
    """Profile samples from finite-chart (X, Y, Z) rows.

    Rows with X <= 0 or Z <= 0 (the invariant planes) carry no profile
    information and are skipped, as are rows whose ξ or f would overflow.
    """
    xyz = np.asarray(xyz, dtype=float).reshape(-1, 3)
    ok = np.all(np.isfinite(xyz), axis=1) & (xyz[:, 0] > 0) & (xyz[:, 2] > 0)
    xyz = xyz[ok]
    if xyz.shape[0] < 2:
        raise ReconstructFailed("fewer than two samples with X > 0 and Z > 0")
    lx, lf = _log_solve(ps, xyz[:, 0], xyz[:, 2])
    keep = (np.abs(lx) < LOG_LIMIT) & (np.abs(lf) < LOG_LIMIT)
    lx, lf, xyz = lx[keep], lf[keep], xyz[keep]
    order = np.argsort(lx, kind="stable")
    lx, lf, xyz = lx[order], lf[order], xyz[order]
    strict = np.concatenate(([True], np.diff(lx) > 0))
    lx, lf, xyz = lx[strict], lf[strict], xyz[strict]
    if lx.size < 2:
        raise ReconstructFailed("reconstructed ξ is not increasing on at least two samples")
    xi, f = np.exp(lx), np.exp(lf)
    fprime = f / xi * xyz[:, 1] / xyz[:, 0]
    return ProfileCurve(ps, xi, f, fprime, lx, lf, xyz, source)


def reconstruct(ps: ParamSet, orbit, source: str = "") -> ProfileCurve:
    """Profile of an :class:`~blowup_lab.orbits.Orbit` (or an array of XYZ rows)."""
    if hasattr(orbit, "finite"):
        _, xyz = orbit.finite()
        if not source and getattr(orbit, "fate", None) is not None:
            source = orbit.fate.kind.value
    else:
        xyz = orbit
    return reconstruct_xyz(ps, xyz, source)


def ode_terms(curve: ProfileCurve) -> np.ndarray:
    """Terms (f^m)'', (N-1)(f^m)'/ξ, -αf, βξf', ξ^σ f^p of the profile equation.

    (f^m)' = αξYf, and its derivative uses dY/dξ = Ẏ/(ξX) with Ẏ taken from
    the vector field at the sample.
    """
    m, p, N, s, a, b = _consts(curve.ps)
    X, Y, Z = curve.xyz.T
    Ydot = np.asarray(field_function(curve.ps, FINITE)(X, Y, Z)[1])
    f = curve.f
    d2 = a * f * (Y + Ydot / X + Y * Y / X)
    return np.vstack([d2, a * (N - 1) * Y * f, -a * f, b * f * Y / X, a * Z * f])


def ode_residual(curve: ProfileCurve) -> np.ndarray:
    """Pointwise residual of the profile equation scaled by max(1, |largest term|)."""
    t = ode_terms(curve)
    return np.abs(t.sum(axis=0)) / np.maximum(1.0, np.abs(t).max(axis=0))


def derivative_consistency(curve: ProfileCurve) -> float:
    """Largest relative gap between f' and a centred difference of f (a coarse check)."""
    lx, lf = curve.log_xi, curve.log_f
    if lx.size < 3:
        return 0.0
    slope = (lf[2:] - lf[:-2]) / (lx[2:] - lx[:-2])
    expect = curve.xyz[1:-1, 1] / curve.xyz[1:-1, 0]
    return float(np.max(np.abs(slope - expect) / np.maximum(1.0, np.abs(expect))))


# ------------------------------------------------------------------- fitting


def _window(curve: ProfileCurve, end: str) -> np.ndarray:
    lx = curve.log_xi
    ln10 = math.log(10.0)
    if end == "xi_to_0":
        return lx <= lx[0] + ln10
    if end == "xi_to_inf":
        return lx >= lx[-1] - ln10
    if end == "interface":
        xi0 = _extrapolated_zero(curve)
        return (curve.xi >= 0.95 * xi0) & (curve.xi <= xi0)
    raise ValueError(f"unknown window {end!r}")


def _extrapolated_zero(curve: ProfileCurve, rounds: int = 3) -> float:
    """Zero of f^{m-1} from a quadratic in s = ξ² over the last 5% of ξ.

    Starts from the last sample and re-fits on the window the current
    estimate defines.
    """
    m = curve.ps.as_tuple()[0]
    s_all, g_all = curve.xi ** 2, curve.f ** (m - 1)
    s0 = s_all[-1]
    for _ in range(rounds):
        sel = s_all >= 0.9025 * s0
        if sel.sum() < 3:
            raise NoModelFits("too few samples near the last point to locate a zero")
        root = _quad_roots(np.polyfit(s_all[sel], g_all[sel], 2), s_all[-1])
        if root is None:
            raise NoModelFits("f^(m-1) does not extrapolate to a zero")
        s0 = root
    return math.sqrt(s0)


def _quad_roots(coef, s_last: float) -> Optional[float]:
    # the root nearest the last sample; f^{m-1} may already be ~0 there
    r = np.roots(coef) if abs(coef[0]) > 0 else np.array([-coef[2] / coef[1]])
    r = np.real(r[np.isreal(r)])
    r = r[r > 0]
    return float(r[np.argmin(np.abs(r - s_last))]) if r.size else None


def _fixed_power(lx, lf, q) -> tuple:
    lk = float(np.mean(lf - q * lx))
    return math.exp(lk), float(np.max(np.abs(np.expm1(lk + q * lx - lf))))


def _free_power(lx, lf) -> tuple:
    q, lk = np.polyfit(lx, lf, 1)
    return float(q), math.exp(lk), float(np.max(np.abs(np.expm1(lk + q * lx - lf))))


def _lstsq(cols: Sequence[np.ndarray], y: np.ndarray) -> tuple:
    A = np.column_stack(cols)
    scale = np.abs(A).max(axis=0)
    scale[scale == 0] = 1.0
    coef = np.linalg.lstsq(A / scale, y, rcond=None)[0] / scale
    return coef, A @ coef


def _fit_q1(curve, sel) -> Optional[tuple]:
    """f^{m-1} = K + c2 ξ² + c3 ξ^{σ+2} with K > 0.

    Over one decade ξ² and ξ^{σ+2} are nearly collinear for small |σ|, so
    besides the free fit the subleading coefficient is pinned at its
    predicted value and the leading one refitted (``c2_pinned`` for σ > 0,
    ``c3_pinned`` for σ < 0).
    """
    m, p, N, s, a, b = _consts(curve.ps)
    xi, f = curve.xi[sel], curve.f[sel]
    g = f ** (m - 1)
    one, x2, xs = np.ones_like(xi), xi ** 2, xi ** (s + 2)
    coef, model = _lstsq([one, x2] if s == 0 else [one, x2, xs], g)
    K = float(coef[0])
    # f tends to a positive constant: K must dominate f^{m-1} over the whole window
    if not (K > 0 and 0.5 * g.max() <= K <= 2 * g.min()):
        return None
    with np.errstate(invalid="ignore"):
        fm = np.where(model > 0, model, np.nan) ** (1 / (m - 1))
    res = float(np.nanmax(np.abs(fm / f - 1))) if np.isfinite(fm).any() else math.inf
    kp = K ** ((p - 1) / (m - 1))
    c2_exp = a * (m - 1) / (2 * m * N)
    c3_exp = -(m - 1) * kp / (m * (N + s) * (s + 2))
    c = {"K": K, "f0": K ** (1 / (m - 1)), "c2": float(coef[1])}
    if s > 0:
        pinned, _ = _lstsq([one, x2], g - c3_exp * xs)
        c.update(c3=float(coef[2]), c2_pinned=float(pinned[1]), variant="sigma>0")
        exp = {"c2": c2_exp, "c3": c3_exp}
    elif s < 0:
        pinned, _ = _lstsq([one, xs], g - c2_exp * x2)
        c.update(c3=float(coef[2]), c3_pinned=float(pinned[1]), variant="sigma<0")
        exp = {"c2": c2_exp, "c3": c3_exp}
    else:
        c["variant"] = "sigma=0"
        exp = {"c2": (m - 1) * (a - kp) / (2 * m * N)}
    return c, res, exp


def _fit_log(curve, sel) -> Optional[tuple]:
    m = curve.ps.as_tuple()[0]
    xi, f = curve.xi[sel], curve.f[sel]
    if not np.all(xi < 1):
        return None
    coef, model = _lstsq([-np.log(xi), np.ones_like(xi)], f ** m)
    if not coef[0] > 0 or np.any(model <= 0):
        return None
    return ({"K": float(coef[0] ** (1 / m)), "shift": float(coef[1])},
            float(np.max(np.abs((model ** (1 / m)) / f - 1))), {})


def fit_behavior(curve: ProfileCurve, window: str) -> BehaviorFit:
    """Fit the local forms admissible at one end of the profile.

    ``window`` is ``xi_to_0`` (lowest decade of ξ), ``xi_to_inf`` (highest
    decade) or ``interface`` (last 5% before the extrapolated zero of
    f^{m-1}).  The kind with the smallest maximal relative deviation wins;
    :class:`NoModelFits` is raised if none stays below 5%, or if an end
    window covers less than a factor ``MIN_SPAN`` in ξ.
    """
    ps = curve.ps
    m, p, N, s, a, b = _consts(ps)
    sel = _window(curve, window)
    n = int(sel.sum())
    if n < MIN_WINDOW:
        raise NoModelFits(f"window {window} holds {n} samples, need {MIN_WINDOW}")
    lx, lf = curve.log_xi[sel], curve.log_f[sel]
    span = (float(curve.xi[sel][0]), float(curve.xi[sel][-1]))
    q_free, k_free, r_free = _free_power(lx, lf)
    trials: dict = {}

    if window == "interface":
        return _fit_interface(curve, sel, span, n)
    if span[1] < MIN_SPAN * span[0]:
        raise NoModelFits(f"window {window} spans only xi in [{span[0]:.6g}, {span[1]:.6g}]")

    if window == "xi_to_0":
        powers = {BehaviorKind.P2_TYPE: 2 / (m - 1), BehaviorKind.P0_TYPE: (s + 2) / (m - p)}
        if N >= 3:
            powers[BehaviorKind.Q5_ASYMPTOTE] = -(N - 2) / m
        if N == 1:
            powers[BehaviorKind.Q5_N1] = 1 / m
        for kind, q in powers.items():
            K, r = _fixed_power(lx, lf, q)
            exp = {"exponent": q}
            if kind is BehaviorKind.P2_TYPE:
                exp["K"] = ((m - 1) / (2 * m * (m * N - N + 2))) ** (1 / (m - 1))
            trials[kind] = ({"K": K}, r, exp, q)
        q1 = _fit_q1(curve, sel)
        if q1 is not None:
            trials[BehaviorKind.Q1_POSITIVE] = (q1[0], q1[1], q1[2], 0.0)
        if N == 2:
            lg = _fit_log(curve, sel)
            if lg is not None:
                trials[BehaviorKind.Q1_LOG_N2] = (lg[0], lg[1], {}, None)
    elif window == "xi_to_inf":
        if p > 1:
            q = -s / (p - 1)
            K, r = _fixed_power(lx, lf, q)
            trials[BehaviorKind.TAIL_GAMMA0] = ({"K": K}, r, {"exponent": q, "K": (1 / (p - 1)) ** (1 / (p - 1))}, q)
        if s > 0:
            q = (s + 2) / (m - 1)
            with np.errstate(over="ignore"):
                corr = np.exp(s * lx)
            if np.all(np.isfinite(corr)):
                lk = float(np.mean(lf - q * lx + corr))
                r = float(np.max(np.abs(np.expm1(lk + q * lx - corr - lf))))
                trials[BehaviorKind.TAIL_Q4_P1] = ({"K": math.exp(lk)}, r, {"exponent": q}, q)
    else:
        raise ValueError(f"unknown window {window!r}")

    if not trials:
        raise NoModelFits(f"no model applies at {window}")
    summary = {k.value: v[1] for k, v in trials.items()}
    kind = min(trials, key=lambda k: trials[k][1])
    consts, res, exp, _ = trials[kind]
    consts = dict(consts)
    consts["free_exponent"] = q_free
    consts["free_amplitude"] = k_free
    fit = BehaviorFit(kind, consts, res, span, n, q_free, exp, summary, window)
    if res > FIT_TOL:
        raise NoModelFits(f"best model {kind.value} deviates by {res:.3g}")
    return fit


def values_at_zero(ps: ParamSet, fit: BehaviorFit) -> dict:
    """f(0) and (f^m)'(0) implied by a ξ→0 fit.

    A profile is admissible at the origin when (f^m)'(0) = 0; power laws
    with m·q > 1 and the Q1 form both satisfy it, f(0) = 0 for the former
    and f(0) = K^{1/(m-1)} > 0 for the latter.
    """
    m = ps.as_tuple()[0]
    c = fit.constants
    if fit.kind is BehaviorKind.Q1_POSITIVE:
        return {"f0": c["f0"], "dfm0": 0.0, "good": c["f0"] > 0}
    if fit.kind in (BehaviorKind.P2_TYPE, BehaviorKind.P0_TYPE, BehaviorKind.Q5_N1,
                    BehaviorKind.Q5_ASYMPTOTE):
        q = fit.expected["exponent"]
        if q <= 0:
            return {"f0": math.inf, "dfm0": math.inf, "good": False}
        dfm0 = 0.0 if m * q > 1 else (m * c["K"] ** m if m * q == 1 else math.inf)
        return {"f0": 0.0, "dfm0": dfm0, "good": dfm0 == 0.0}
    if fit.kind is BehaviorKind.Q1_LOG_N2:
        return {"f0": math.inf, "dfm0": math.inf, "good": False}
    raise ValueError(f"{fit.kind.value} is not a behavior at ξ = 0")


# ---------------------------------------------------------------- interface


def _fit_interface(curve, sel, span, n) -> BehaviorFit:
    """f^{m-1} against s = ξ² near the zero.

    A quadratic in s absorbs the curvature of the window; the reported
    coefficient ``c`` is its slope at the zero s0, where the local form is
    exact, and ``C = -c·s0``.
    """
    m, p, N, s, a, b = _consts(curve.ps)
    s_, g = curve.xi[sel] ** 2, curve.f[sel] ** (m - 1)
    coef = np.polyfit(s_, g, 2)
    res = float(np.max(np.abs(np.polyval(coef, s_) - g)) / np.max(np.abs(g)))
    s0 = _quad_roots(coef, s_[-1])
    if s0 is None:
        raise NoModelFits("interface model has no zero beyond the window")
    c = float(2 * coef[0] * s0 + coef[1])
    C = -c * s0
    consts = {"C": C, "c": c, "c_limit_from_Y": (m - 1) * a * float(curve.xyz[-1, 1]) / (2 * m),
              "xi0": math.sqrt(2 * m * C / (b * (m - 1))) if C > 0 else math.nan,
              "xi0_extrapolated": math.sqrt(s0)}
    fit = BehaviorFit(BehaviorKind.INTERFACE, consts, res, span, n, None, {"c": -b * (m - 1) / (2 * m)},
                      end="interface")
    if res > FIT_TOL or not c < 0:
        raise NoModelFits(f"interface model deviates by {res:.3g} (slope {c:.3g})")
    return fit



def interface_from_constant(ps: ParamSet, C: float) -> float:
    m = ps.as_tuple()[0]
    b = float(derive(ps).beta)
    return math.sqrt(2 * m * C / (b * (m - 1)))


def interface_from_gamma(ps: ParamSet, gamma: float) -> float:
    """Interface position for the family ending at P1^γ (p = 1)."""
    s = ps.as_tuple()[3]
    return (float(derive(ps).alpha) * gamma) ** (1 / s)


def interface_point(curve: ProfileCurve, fit: BehaviorFit | None = None, rel_tol: float = 0.01) -> float:
    """ξ0 = sqrt(2mC/(β(m-1))) from the interface fit.

    The value is cross-checked against the zero of the fitted quadratic;
    :class:`NoModelFits` is raised if they differ by more than ``rel_tol``.
    """
    fit = fit or fit_behavior(curve, "interface")
    if fit.kind is not BehaviorKind.INTERFACE:
        raise NoModelFits(f"fit is {fit.kind.value}, not an interface")
    xi0 = fit.constants["xi0"]
    other = fit.constants["xi0_extrapolated"]
    if not (math.isfinite(xi0) and math.isfinite(other)) or abs(xi0 - other) > rel_tol * xi0:
        raise NoModelFits(f"interface estimates disagree: {xi0} vs {other}")
    return xi0


# ------------------------------------------------------------------ solution


def _model_value(ps: ParamSet, fit: BehaviorFit, xi: float) -> float:
    m, p, N, s, a, b = _consts(ps)
    c = fit.constants
    k = fit.kind
    if k in (BehaviorKind.P2_TYPE, BehaviorKind.P0_TYPE, BehaviorKind.Q5_N1):
        return 0.0 if xi == 0 else c["K"] * xi ** fit.expected["exponent"]
    if k is BehaviorKind.Q1_POSITIVE:
        g = c["K"] + c["c2"] * xi ** 2 + c.get("c3", 0.0) * xi ** (s + 2)
        return max(g, 0.0) ** (1 / (m - 1))
    if k is BehaviorKind.INTERFACE:
        return max(c["C"] + c["c"] * xi ** 2, 0.0) ** (1 / (m - 1))
    if k is BehaviorKind.TAIL_GAMMA0:
        return c["K"] * xi ** fit.expected["exponent"]
    raise OutOfRange(f"cannot extrapolate with a {k.value} fit")


def evaluate_solution(ps: ParamSet, curve: ProfileCurve, x: float, t: float, T: float,
                      fits: Sequence[BehaviorFit] = ()) -> float:
    """u(x, t) = (T - t)^{-α} f(|x| (T - t)^β).

    Inside the sampled ξ-range f is interpolated monotonically (PCHIP in
    log-log form).  Outside it a fit from ``fits`` covering that end is
    used; without one, :class:`OutOfRange` is raised.
    """
    if not t < T:
        raise OutOfRange("need t < T")
    d = derive(ps)
    a, b = float(d.alpha), float(d.beta)
    tau = T - t
    xi = abs(x) * tau ** b
    lo, hi = float(curve.xi[0]), float(curve.xi[-1])
    if lo <= xi <= hi:
        f = float(np.exp(PchipInterpolator(curve.log_xi, curve.log_f)(math.log(xi))))
    else:
        want = ("xi_to_0",) if xi < lo else ("xi_to_inf", "interface")
        for fit in fits:
            end = fit.end or ("xi_to_0" if fit.window[1] <= math.sqrt(lo * hi) else "xi_to_inf")
            if end in want:
                f = _model_value(ps, fit, xi)
                break
        else:
            raise OutOfRange(f"ξ = {xi:.6g} lies outside [{lo:.6g}, {hi:.6g}] and no fit covers it")
    return tau ** (-a) * f
