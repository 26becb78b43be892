"""Command-line front end: ``blowup-lab <command> [options]``.

Every command prints a JSON summary on stdout.  With ``--out DIR`` the
artifacts (CSV, JSON, SVG) go to DIR together with ``manifest.json``, which
records the resolved configuration and can be passed back via ``--config``.

Exit status: 0 on success, 1 when the library raises (an error JSON is
printed), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__, barriers, critical, orbits, profiles, serialize, shooting
from .errors import BlowupLabError
from .odeint import IntegrationConfig
from .params import ParamSet, derive, validate
from .svgplot import Plot, phase_projection
from .systems import FINITE, PhaseState

COMMANDS = ("analyze-point", "integrate-orbit", "classify", "three-sets", "scan-sigma",
            "find-sigma-star", "verify-barrier", "reconstruct-profile", "plot")

# option name -> (argparse kwargs, commands that accept it; None = all)
OPTIONS: dict[str, tuple[dict, tuple | None]] = {
    "params": ({"help": 'parameter JSON, e.g. \'{"m":3,"p":2,"N":3,"sigma":0.2}\''}, None),
    "out": ({"help": "directory for artifacts and manifest.json"}, None),
    "seed": ({"type": int, "help": "seed of record for randomized sampling"}, None),
    "point": ({"help": "critical point id (default: all)"}, ("analyze-point",)),
    "gamma": ({"help": "JSON list of γ values sampling the line of P1 when p = 1"}, ("analyze-point",)),
    "start": ({"choices": ("P2", "P0", "Q1", "P1"), "help": "equilibrium to leave (default P2)"},
              ("integrate-orbit", "classify", "plot")),
    "theta": ({"type": float, "help": "angle of the P1 stable family, in [0, π/2]"},
              ("integrate-orbit", "classify", "plot")),
    "k": ({"type": float, "help": "family constant for P0 (Z ≈ K X) or Q1 seeds"},
          ("integrate-orbit", "classify", "plot")),
    "eps": ({"type": float, "help": "seed offset from the equilibrium"}, ("integrate-orbit", "classify", "plot")),
    "max_eta": ({"type": float, "help": "η budget of the integration"},
                ("integrate-orbit", "classify", "plot", "reconstruct-profile")),
    "max_step": ({"type": float, "help": "largest step in chart time"},
                 ("integrate-orbit", "classify", "plot", "reconstruct-profile")),
    "delta": ({"type": float, "help": "radius at which an approach to an equilibrium counts as entry"},
              ("integrate-orbit", "classify", "plot", "reconstruct-profile", "scan-sigma",
               "find-sigma-star", "three-sets")),
    "orbit_in": ({"help": "orbit CSV (eta, chart_id, c1, c2, c3); comma-separated for several"},
                 ("classify", "reconstruct-profile", "plot")),
    "profile_in": ({"help": "profile CSV (xi, f, fprime)"}, ("plot",)),
    "grid": ({"help": "θ count or list (three-sets), σ list (scan-sigma), cells per side (verify-barrier)"},
             ("three-sets", "scan-sigma", "verify-barrier")),
    "bracket": ({"help": "JSON pair [lo, hi]"}, ("find-sigma-star",)),
    "tol": ({"type": float, "help": "relative bracket width"}, ("find-sigma-star",)),
    "barrier": ({"help": "barrier id: " + ", ".join(barriers.BARRIER_IDS)}, ("verify-barrier",)),
    "mode": ({"choices": ("grid", "interval"), "help": "certification mode"}, ("verify-barrier",)),
    "box": ({"help": "JSON box {m:[lo,hi], p:[lo,hi], N:int|[lo,hi], sigma:[lo,hi]}"}, ("verify-barrier",)),
    "state_box": ({"help": "JSON [[u0,u1],[v0,v1]] sub-rectangle of the face parameters"},
                  ("verify-barrier",)),
    "max_boxes": ({"type": int, "help": "interval-mode subdivision limit (about 1 ms per box)"},
                  ("verify-barrier",)),
    "samples": ({"type": int, "help": "random on-barrier states for the closed-form check"},
                ("verify-barrier",)),
    "workers": ({"type": int, "help": "parallel orbit integrations"}, ("three-sets", "scan-sigma")),
}


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blowup-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="command")
    for cmd in COMMANDS:
        sp = sub.add_parser(cmd, help=HANDLERS[cmd][1])
        sp.add_argument("--config", help="JSON file of options (a manifest.json works too)")
        for name, (kw, cmds) in OPTIONS.items():
            if cmds is None or cmd in cmds:
                sp.add_argument("--" + name.replace("_", "-"), dest=name, default=None, **kw)
    return parser


def _load_config(path: str | None, command: str) -> dict:
    if not path:
        return {}
    data = json.loads(Path(path).read_text())
    if "config" in data and "command" in data:
        if data["command"] != command:
            raise UsageError(f"manifest is for {data['command']!r}, not {command!r}")
        data = data["config"]
    allowed = {n for n, (_, cmds) in OPTIONS.items() if cmds is None or command in cmds}
    unknown = set(data) - allowed
    if unknown:
        raise UsageError(f"unknown config keys for {command}: {sorted(unknown)}")
    return data


def resolve(args: argparse.Namespace) -> dict:
    """Config file values overridden by flags; JSON-valued flags decoded."""
    cfg = _load_config(args.config, args.command)
    for name in OPTIONS:
        v = getattr(args, name, None)
        if v is not None:
            cfg[name] = v
    for key in ("params", "bracket", "box", "state_box", "gamma", "grid"):
        if isinstance(cfg.get(key), str):
            try:
                cfg[key] = json.loads(cfg[key])
            except json.JSONDecodeError as exc:
                raise UsageError(f"--{key.replace('_', '-')} is not valid JSON: {exc}") from None
    return cfg


def _params(cfg: dict, sigma_optional: bool = False) -> ParamSet | dict:
    raw = cfg.get("params")
    if raw is None:
        raise UsageError("--params is required")
    if not isinstance(raw, dict):
        raise UsageError("--params must be a JSON object")
    if sigma_optional and "sigma" not in raw:
        return raw
    return validate(raw)


def _integration(cfg: dict, **defaults) -> IntegrationConfig:
    kw = {"max_eta": orbits.FORWARD_MAX_ETA, **defaults}
    if cfg.get("max_eta") is not None:
        kw["max_eta"] = float(cfg["max_eta"])
    if cfg.get("max_step") is not None:
        kw["max_step"] = float(cfg["max_step"])
    return IntegrationConfig(**kw)


def _fate(cfg: dict, **defaults) -> orbits.FateConfig:
    kw = dict(defaults)
    if cfg.get("delta") is not None:
        kw["delta"] = float(cfg["delta"])
    return orbits.FateConfig(**kw)


# ----------------------------------------------------------------- outputs


class Sink:
    """Collects artifacts of one run and writes them with the manifest."""

    def __init__(self, out: str | None, command: str, cfg: dict):
        self.dir = Path(out) if out else None
        self.command, self.cfg = command, cfg
        self.files: list[str] = []
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, writer: Callable[[Path], None]) -> None:
        if self.dir:
            writer(self.dir / name)
            self.files.append(name)

    def text(self, name: str, content: str) -> None:
        self.write(name, lambda p: p.write_text(content))

    def close(self, summary: dict) -> None:
        if not self.dir:
            return
        self.text(f"{self.command.replace('-', '_')}.json", serialize.dumps(summary))
        manifest = {"command": self.command, "config": self.cfg, "version": __version__,
                    "artifacts": sorted(self.files + ["manifest.json"])}
        (self.dir / "manifest.json").write_text(serialize.dumps(manifest))


# ---------------------------------------------------------------- commands


def _start_orbit(ps: ParamSet, cfg: dict) -> orbits.Orbit:
    start = cfg.get("start") or "P2"
    icfg, fcfg = _integration(cfg), _fate(cfg)
    eps = cfg.get("eps")
    if start == "P2":
        seed = orbits.seed_from_P2(ps, eps or 1e-6)
    elif start == "P0":
        seed = orbits.seed_from_P0(ps, float(cfg.get("k") or 1.0), eps or 1e-5)
    elif start == "Q1":
        seed = orbits.seed_from_Q1(ps, float(cfg.get("k") if cfg.get("k") is not None else 1.0), eps or 1e-6)
    else:
        if cfg.get("theta") is None:
            raise UsageError("--theta is required with --start P1")
        seed = orbits.seed_backward_from_P1(ps, float(cfg["theta"]), eps or 1e-9)
    return orbits.run_orbit(ps, seed, icfg, fcfg)


def _orbit_summary(ob: orbits.Orbit) -> dict:
    out = ob.to_json()
    out["samples"] = len(ob.samples)
    return out


def cmd_analyze_point(cfg: dict, sink: Sink) -> dict:
    ps = _params(cfg)
    gammas = tuple(float(g) for g in (cfg.get("gamma") or ()))
    pts = critical.catalog(ps, gammas)
    if cfg.get("point"):
        pts = [cp for cp in pts if cp.id == cfg["point"]]
        if not pts:
            raise UsageError(f"no critical point {cfg['point']!r} for these parameters")
    d = derive(ps).as_float()
    summary = {"params": ps.to_json(),
               "derived": {k: getattr(d, k) for k in ("alpha", "beta", "L", "gamma0", "pc", "phi", "Y0")},
               "P2_lambda3": critical.p2_lambda3(ps),
               "points": [cp.to_json() for cp in pts]}
    return summary


def cmd_integrate_orbit(cfg: dict, sink: Sink) -> dict:
    ps = _params(cfg)
    ob = _start_orbit(ps, cfg)
    sink.write("orbit.csv", lambda p: serialize.write_orbit_csv(ob, p))
    sink.text("orbit_events.json", serialize.dumps(ob.to_json()))
    return {"params": ps.to_json(), "orbit": _orbit_summary(ob)}


def _orbits_in(cfg: dict) -> list:
    return [serialize.read_orbit_csv(p.strip()) for p in str(cfg["orbit_in"]).split(",") if p.strip()]


def cmd_classify(cfg: dict, sink: Sink) -> dict:
    ps = _params(cfg)
    fcfg = _fate(cfg)
    if cfg.get("orbit_in"):
        obs = _orbits_in(cfg)
        fates = [orbits.classify(ob, ps, fcfg) for ob in obs]
    else:
        ob = _start_orbit(ps, cfg)
        fates = [orbits.classify(ob, ps, fcfg)]
    return {"params": ps.to_json(), "fates": [f.to_json() for f in fates]}


def _strip(w: dict | None) -> dict | None:
    return None if w is None else {k: v for k, v in w.items() if k != "orbit"}


def cmd_three_sets(cfg: dict, sink: Sink) -> dict:
    ps = _params(cfg)
    grid = cfg.get("grid")
    if grid is None:
        thetas = shooting.default_theta_grid()
    elif isinstance(grid, (int, float)):
        thetas = shooting.default_theta_grid(int(grid))
    else:
        thetas = [float(t) for t in grid]
    res = shooting.three_sets_scan(ps, thetas, fate_cfg=_fate(cfg), workers=int(cfg.get("workers") or 1))
    sink.write("three_sets.csv", lambda p: p.write_text(
        "theta,fate,set\n" + "".join(f"{t!r},{f.kind.value},{f.diagnostics['set']}\n"
                                     for t, f in zip(res.parameter_grid, res.fates))))
    out = res.to_json()
    out["witness"] = _strip(res.witness)
    out["sets"] = {s: sum(1 for f in res.fates if f.diagnostics["set"] == s) for s in "ABC?"}
    return {"params": ps.to_json(), "scan": out}


def cmd_scan_sigma(cfg: dict, sink: Sink) -> dict:
    raw = _params(cfg, sigma_optional=True)
    grid = cfg.get("grid")
    if not isinstance(grid, list) or not grid:
        raise UsageError("--grid must be a JSON list of σ values")
    m, p, N = (raw.m, raw.p, raw.N) if isinstance(raw, ParamSet) else (raw["m"], raw["p"], raw["N"])
    for s in grid:
        validate((m, p, N, s))
    res = shooting.sigma_scan(m, p, N, grid, fate_cfg=_fate(cfg), workers=int(cfg.get("workers") or 1))
    report = shooting.sigma0_sigma1_report(m, p, N, res)
    sink.write("scan_sigma.csv", lambda path: path.write_text(
        "sigma,fate\n" + "".join(f"{s!r},{f.kind.value}\n" for s, f in zip(res.parameter_grid, res.fates))))
    return {"scan": res.to_json(), "report": report}


def cmd_find_sigma_star(cfg: dict, sink: Sink) -> dict:
    raw = _params(cfg, sigma_optional=True)
    m, p, N = (raw.m, raw.p, raw.N) if isinstance(raw, ParamSet) else (raw["m"], raw["p"], raw["N"])
    br = cfg.get("bracket")
    if not (isinstance(br, list) and len(br) == 2):
        raise UsageError("--bracket must be a JSON pair [lo, hi]")
    res = shooting.find_sigma_star(m, p, N, tuple(br), tol=float(cfg.get("tol") or 1e-3),
                                   fate_cfg=_fate(cfg))
    wit = res.witness["orbit"]
    sink.write("witness_orbit.csv", lambda path: serialize.write_orbit_csv(wit, path))
    return {"params": {"m": m, "p": p, "N": N}, "sigma_star": res.to_json()}


def cmd_verify_barrier(cfg: dict, sink: Sink) -> dict:
    if not cfg.get("barrier"):
        raise UsageError("--barrier is required")
    bar = barriers.get(cfg["barrier"])
    mode = cfg.get("mode") or "grid"
    state_box = tuple(tuple(float(x) for x in r) for r in cfg.get("state_box") or ((0, 1), (0, 1)))
    grid = int(cfg.get("grid") or barriers.DEFAULT_GRID)
    if cfg.get("box") is not None:
        target = cfg["box"]
    else:
        target = _params(cfg)
    rep = barriers.certify_sign(target, bar, mode=mode, grid=grid, state_box=state_box,
                                max_boxes=int(cfg.get("max_boxes") or barriers.MAX_BOXES))
    out = {"report": rep.to_json()}
    if isinstance(target, ParamSet) and not (bar.requires_n1 and target.N != 1):
        rng = np.random.default_rng(cfg.get("seed") if cfg.get("seed") is not None else 0)
        worst = 0.0
        n = int(cfg.get("samples") or 1000)
        for face in bar.faces:
            for pt in barriers.sample_on_barrier(target, bar, max(1, n // len(bar.faces)), rng, face.name):
                worst = max(worst, barriers.flow_value(target, bar, PhaseState(face.chart, pt)).rel_diff)
        out["closed_form_agreement"] = {"samples": n, "max_rel_diff": worst,
                                        "tolerance": barriers.AGREE_TOL}
    sink.text("barrier_report.json", serialize.dumps(out))
    return out


def cmd_reconstruct_profile(cfg: dict, sink: Sink) -> dict:
    ps = _params(cfg)
    if cfg.get("orbit_in"):
        ob = _orbits_in(cfg)[0]
    else:
        ob = _start_orbit(ps, cfg)
    curve = profiles.reconstruct(ps, ob)
    fits, failures = {}, {}
    for w in ("xi_to_0", "xi_to_inf", "interface"):
        try:
            fits[w] = profiles.fit_behavior(curve, w).to_json()
        except BlowupLabError as exc:
            failures[w] = exc.to_json()
    res = profiles.ode_residual(curve)
    sink.write("profile.csv", lambda p: serialize.write_profile_csv(curve, p))
    summary = {"params": ps.to_json(), "samples": len(curve),
               "xi_range": [float(curve.xi[0]), float(curve.xi[-1])],
               "max_ode_residual": float(res.max()), "fits": fits, "no_fit": failures}
    sink.text("fits.json", serialize.dumps(summary))
    return summary


def _finite_xyz(ob: orbits.Orbit) -> np.ndarray:
    return ob.finite()[1]


def _guides(ps: ParamSet, axes: tuple) -> list:
    """Barrier planes and lines that the projection shows as straight traces."""
    C = barriers.consts_of(ps)
    XP2, YP2 = C.XP2, C.YP2
    out = []
    if axes == (0, 1):
        out += [([XP2, XP2], [-C.Y0, YP2], "X = X(P2)"), ([0, XP2], [YP2, YP2], "Y = Y(P2)"),
                ([0, XP2], [-C.Y0, -C.Y0], "Y = -Y0")]
        xs = np.linspace(0, XP2, 60)
        out.append((xs, 2 * xs / (ps.as_tuple()[0] - 1), "(m-1)Y = 2X"))
    elif axes == (0, 2):
        out.append(([XP2, XP2], [0, 2], "X = X(P2)"))
    return out


def cmd_plot(cfg: dict, sink: Sink) -> dict:
    ps = _params(cfg)
    if cfg.get("orbit_in"):
        obs = _orbits_in(cfg)
        for ob in obs:
            ob.fate = orbits.classify(ob, ps, _fate(cfg))
        labels = [Path(p.strip()).stem for p in str(cfg["orbit_in"]).split(",") if p.strip()]
    else:
        obs = [_start_orbit(ps, cfg)]
        labels = [f"from {cfg.get('start') or 'P2'}"]
    xyzs = [_finite_xyz(ob) for ob in obs]
    pts = [(cp.id, cp.coords) for cp in critical.catalog(ps) if cp.chart == FINITE]
    tag = "m={m} p={p} N={N} σ={sigma}".format(**ps.to_json())
    made = []
    for axes, name in (((0, 1), "XY"), ((0, 2), "XZ"), ((1, 2), "YZ")):
        plot = phase_projection(f"Orbit projection {name[0]}-{name[1]}  ({tag})", xyzs, axes, labels,
                                pts, _guides(ps, axes))
        fname = f"orbit_{name}.svg"
        sink.text(fname, plot.render())
        made.append(fname)
    curves = []
    if cfg.get("profile_in"):
        xi, f, _ = serialize.read_profile_csv(cfg["profile_in"])
        curves.append((xi, f, Path(cfg["profile_in"]).stem))
    else:
        for ob, label in zip(obs, labels):
            try:
                c = profiles.reconstruct(ps, ob)
            except BlowupLabError:
                continue
            curves.append((c.xi, c.f, label))
    if curves:
        plot = Plot(f"Profile f(ξ)  ({tag})", "ξ", "f", logx=True, logy=True)
        for xi, f, label in curves:
            plot.line(xi, f, label)
        sink.text("profile.svg", plot.render())
        made.append("profile.svg")
    return {"params": ps.to_json(), "svg": made, "orbits": len(obs),
            "fates": [ob.fate.kind.value if ob.fate else None for ob in obs]}


HANDLERS: dict[str, tuple[Callable[[dict, Sink], dict], str]] = {
    "analyze-point": (cmd_analyze_point, "critical points with eigenvalues and manifold dimensions"),
    "integrate-orbit": (cmd_integrate_orbit, "integrate an orbit from a seed and classify its fate"),
    "classify": (cmd_classify, "classify stored (or freshly integrated) orbits"),
    "three-sets": (cmd_three_sets, "backward shooting along the stable family of P1"),
    "scan-sigma": (cmd_scan_sigma, "fates of the P2 orbit over a σ grid"),
    "find-sigma-star": (cmd_find_sigma_star, "bisection for the σ where the P2 orbit meets P1"),
    "verify-barrier": (cmd_verify_barrier, "certify the sign of the flow across a barrier"),
    "reconstruct-profile": (cmd_reconstruct_profile, "profile f(ξ) from an orbit, with local fits"),
    "plot": (cmd_plot, "SVG projections of orbits and profile plots"),
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not args.command:
        parser.print_usage(sys.stderr)
        return 2
    try:
        cfg = resolve(args)
        sink = Sink(cfg.get("out"), args.command, cfg)
        summary = HANDLERS[args.command][0](cfg, sink)
        sink.close(summary)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"blowup-lab {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except BlowupLabError as exc:
        print(json.dumps(exc.to_json()))
        return 1
    except (ValueError, KeyError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
        return 1
    sys.stdout.write(serialize.dumps(summary))
    return 0


if __name__ == "__main__":
    sys.exit(main())
