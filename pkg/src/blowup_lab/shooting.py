"""Shooting over the stable-manifold parameter of P1 and over σ."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

from .errors import BracketInvalid, EmptyScan
from .odeint import IntegrationConfig
from .orbits import (FateConfig, FateKind, Orbit, forward_from_P2, run_orbit,
                     seed_backward_from_P1)
from .params import ParamSet, validate


@dataclass
class ShootingResult:
    parameter_grid: list
    fates: list
    boundaries: list = field(default_factory=list)
    orbits: list = field(default_factory=list)
    witness: Optional[dict] = None

    def kinds(self) -> list:
        return [f.kind.value for f in self.fates]

    def to_json(self) -> dict:
        return {"parameter_grid": list(self.parameter_grid),
                "fates": [f.to_json() for f in self.fates],
                "boundaries": [list(b) for b in self.boundaries],
                "witness": self.witness}


def _boundaries(grid, fates) -> list:
    out = []
    for (a, fa), (b, fb) in zip(zip(grid, fates), zip(grid[1:], fates[1:])):
        if fa.kind is not fb.kind:
            out.append((a, b, f"{fa.kind.value} -> {fb.kind.value}"))
    return out


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- K (θ) family


def default_theta_grid(n: int = 64) -> list:
    return [(k + 0.5) / n * (math.pi / 2) for k in range(n)]


def _set_of(kind: FateKind, N: int) -> str:
    if kind is FateKind.FROM_Q5 or (N == 2 and kind is FateKind.FROM_Q1):
        return "A"
    if kind is FateKind.FROM_Q2:
        return "C"
    if kind is FateKind.UNRESOLVED:
        return "?"
    return "B"


def backward_orbit(ps: ParamSet, theta: float, cfg: IntegrationConfig | None = None,
                   fate_cfg: FateConfig | None = None, eps: float = 1e-9) -> Orbit:
    return run_orbit(ps, seed_backward_from_P1(ps, theta, eps), cfg, fate_cfg)


def three_sets_scan(ps: ParamSet, theta_grid: Sequence[float] | None = None,
                    cfg: IntegrationConfig | None = None, fate_cfg: FateConfig | None = None,
                    refine: int = 60, workers: int = 1, keep_orbits: bool = False) -> ShootingResult:
    """Backward α-limits along the θ-family, with a bisected witness of set B.

    Set A collects orbits from Q5 (from the node sector of Q1 when N = 2),
    set C orbits from Q2 and set B everything else.  The first A/C
    transition is bisected until an orbit lands in B.
    """
    grid = sorted(theta_grid if theta_grid is not None else default_theta_grid())
    orbs = _map(lambda th: backward_orbit(ps, th, cfg, fate_cfg), grid, workers)
    fates = [o.fate for o in orbs]
    for th, f in zip(grid, fates):
        f.diagnostics["set"] = _set_of(f.kind, ps.N)
        f.diagnostics["theta"] = th
    res = ShootingResult(list(grid), fates, _boundaries(grid, fates),
                         orbs if keep_orbits else [])
    N = ps.N
    for th, f in zip(grid, fates):
        if _set_of(f.kind, N) == "B":
            res.witness = {"theta": th, "K": math.tan(th), "fate": f.kind.value, "steps": 0,
                           "orbit": orbs[grid.index(th)]}
            break
    if res.witness is None:
        for lo, hi, _ in res.boundaries:
            slo = _set_of(fates[grid.index(lo)].kind, N)
            shi = _set_of(fates[grid.index(hi)].kind, N)
            if {slo, shi} != {"A", "C"}:
                continue
            w = _bisect_theta(ps, lo, hi, slo, refine, cfg, fate_cfg)
            if w is not None:
                res.witness = w
                break
    return res


def _bisect_theta(ps, lo, hi, slo, refine, cfg, fate_cfg) -> Optional[dict]:
    N = ps.N
    for k in range(refine):
        mid = 0.5 * (lo + hi)
        ob = backward_orbit(ps, mid, cfg, fate_cfg)
        s = _set_of(ob.fate.kind, N)
        if s == "B":
            return {"theta": mid, "K": math.tan(mid), "fate": ob.fate.kind.value, "steps": k + 1,
                    "bracket": (lo, hi), "orbit": ob}
        if s == slo:
            lo = mid
        elif s == "?":
            return {"theta": mid, "K": math.tan(mid), "fate": ob.fate.kind.value,
                    "steps": k + 1, "bracket": (lo, hi), "orbit": ob}
        else:
            hi = mid
    return None


# ---------------------------------------------------------------- σ family


def _sigma_fate_cfg(fate_cfg: FateConfig | None) -> FateConfig:
    # P1 is a saddle: near-critical orbits linger there and then decide.
    return replace(fate_cfg or FateConfig(), detect_p1=False)


def p2_orbit(m, p, N, sigma, cfg=None, fate_cfg=None) -> Orbit:
    ps = validate((m, p, N, sigma))
    return forward_from_P2(ps, cfg, fate_cfg)


def sigma_scan(m, p, N, sigma_grid: Sequence[float], cfg: IntegrationConfig | None = None,
               fate_cfg: FateConfig | None = None, workers: int = 1,
               keep_orbits: bool = False) -> ShootingResult:
    grid = sorted(float(s) for s in sigma_grid)
    fc = _sigma_fate_cfg(fate_cfg)
    orbs = _map(lambda s: p2_orbit(m, p, N, s, cfg, fc), grid, workers)
    fates = [o.fate for o in orbs]
    return ShootingResult(grid, fates, _boundaries(grid, fates), orbs if keep_orbits else [])


@dataclass
class SigmaStar:
    bracket: tuple
    steps: int
    witness_lo: Orbit
    witness_hi: Orbit
    min_dist_P1: float
    history: list
    witness: dict

    def to_json(self) -> dict:
        return {"bracket": list(self.bracket), "steps": self.steps,
                "min_dist_P1": self.min_dist_P1, "history": self.history,
                "fate_lo": self.witness_lo.fate.kind.value,
                "fate_hi": self.witness_hi.fate.kind.value,
                "witness": {k: v for k, v in self.witness.items() if k != "orbit"}}


def find_sigma_star(m, p, N, bracket: tuple, tol: float = 1e-3,
                    cfg: IntegrationConfig | None = None, fate_cfg: FateConfig | None = None,
                    witness_target: float | None = None, max_refine: int = 60) -> SigmaStar:
    """Bisection on σ between a Pgamma0 endpoint and a Q3 endpoint.

    The returned bracket satisfies hi - lo < tol·max(1, |hi|).  Bisection
    then continues internally, without narrowing the returned bracket,
    until an orbit passes within ``witness_target`` (default 10·δ_fate) of
    P1; that orbit is reported as the witness.
    """
    fc = _sigma_fate_cfg(fate_cfg)
    lo, hi = float(bracket[0]), float(bracket[1])
    if lo > hi:
        lo, hi = hi, lo
    sig_of: dict = {}

    def run(sigma: float) -> Orbit:
        ob = p2_orbit(m, p, N, sigma, cfg, fc)
        sig_of[id(ob)] = sigma
        return ob

    olo, ohi = run(lo), run(hi)
    klo, khi = olo.fate.kind, ohi.fate.kind
    if klo is khi:
        raise BracketInvalid(f"both ends of the bracket have fate {klo.value}")
    decided = {FateKind.ENTERS_PGAMMA0, FateKind.ENTERS_Q3}
    if klo not in decided or khi not in decided:
        raise BracketInvalid(f"bracket fates must be Pgamma0 and Q3, got {klo.value}, {khi.value}")
    history = []
    steps = 0

    def best(a: Orbit, b: Orbit) -> Orbit:
        return a if a.fate.diagnostics["min_dist_P1"] <= b.fate.diagnostics["min_dist_P1"] else b

    def bisect_once(lo, hi, olo, ohi):
        mid = 0.5 * (lo + hi)
        om = run(mid)
        k = om.fate.kind
        if k is klo:
            return mid, hi, om, ohi, om
        if k is khi:
            return lo, mid, olo, om, om
        raise BracketInvalid(f"orbit at sigma={mid!r} is {k.value}; cannot bisect")

    while hi - lo >= tol * max(1.0, abs(hi)):
        lo, hi, olo, ohi, om = bisect_once(lo, hi, olo, ohi)
        steps += 1
        history.append({"lo": lo, "hi": hi, "width": hi - lo,
                        "min_dist_P1": best(olo, ohi).fate.diagnostics["min_dist_P1"]})
    out_bracket = (lo, hi)
    target = witness_target if witness_target is not None else 10 * fc.delta
    wit = best(olo, ohi)
    wlo, whi, wolo, wohi = lo, hi, olo, ohi
    extra = 0
    while wit.fate.diagnostics["min_dist_P1"] >= target and extra < max_refine:
        wlo, whi, wolo, wohi, om = bisect_once(wlo, whi, wolo, wohi)
        wit = best(wit, om)
        extra += 1
    witness = {"sigma": sig_of[id(wit)], "min_dist_P1": wit.fate.diagnostics["min_dist_P1"],
               "fate": wit.fate.kind.value, "extra_steps": extra, "orbit": wit}
    dmin = best(olo, ohi).fate.diagnostics["min_dist_P1"]
    return SigmaStar(out_bracket, steps, olo, ohi, dmin, history, witness)


def sigma0_sigma1_report(m, p, N, scan: ShootingResult) -> dict:
    if not scan.parameter_grid:
        raise EmptyScan("the scan has no entries")
    grid, kinds = scan.parameter_grid, [f.kind for f in scan.fates]
    transitions = len(scan.boundaries)
    first = scan.boundaries[0][0] if scan.boundaries else None
    last = scan.boundaries[-1][1] if scan.boundaries else None
    s0 = max((s for s, k in zip(grid, kinds)
              if k is FateKind.ENTERS_PGAMMA0 and (first is None or s <= first)), default=None)
    s1 = min((s for s, k in zip(grid, kinds)
              if k is FateKind.ENTERS_Q3 and (last is None or s >= last)), default=None)
    return {"m": m, "p": p, "N": N, "transitions": transitions,
            "sigma0_lower": s0, "sigma1_upper": s1,
            "conjecture_consistent": transitions == 1,
            "unresolved": [s for s, k in zip(grid, kinds) if k is FateKind.UNRESOLVED]}
