"""CSV and JSON encodings of orbits, profiles and reports.

Floats are written with ``repr`` (the shortest string that round-trips),
so stored artifacts reload bit for bit.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import io
import json
import math
from pathlib import Path

import numpy as np

from .errors import BlowupLabError
from .odeint import Trajectory
from .orbits import Orbit
from .systems import Chart, eta_rate, from_finite, to_finite

ORBIT_COLUMNS = ("eta", "chart_id", "c1", "c2", "c3")
PROFILE_COLUMNS = ("xi", "f", "fprime")


def _num(v) -> str:
    return repr(float(v))


def plain(obj):
    """Recursively convert to JSON-ready builtins; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [plain(v) for v in obj.tolist()]
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, complex):
        return {"re": plain(obj.real), "im": plain(obj.imag)}
    if hasattr(obj, "to_json"):
        return plain(obj.to_json())
    if dataclasses.is_dataclass(obj):
        return plain(dataclasses.asdict(obj))
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps(obj) -> str:
    return json.dumps(plain(obj), indent=2, sort_keys=True) + "\n"


# ----------------------------------------------------------------- orbits


def orbit_rows(orbit: Orbit) -> list:
    etas, charts, coords = orbit.table()
    return [(e, c, *xyz) for e, c, xyz in zip(etas, charts, coords)]


def write_orbit_csv(orbit: Orbit, target) -> None:
    _write(target, ORBIT_COLUMNS,
           ([_num(e), c, _num(a), _num(b), _num(d)] for e, c, a, b, d in orbit_rows(orbit)))


def read_orbit_csv(source, direction: str | None = None) -> Orbit:
    """Rebuild an :class:`Orbit` (without fate) from its CSV.

    Consecutive rows with the same chart form a segment; chart time is
    recovered from dη/dτ of each chart.
    """
    rows = _read(source, ORBIT_COLUMNS)
    if not rows:
        raise ValueError("orbit CSV has no rows")
    parsed = [(float(r["eta"]), Chart.parse(r["chart_id"]),
               (float(r["c1"]), float(r["c2"]), float(r["c3"]))) for r in rows]
    if direction is None:
        direction = "backward" if parsed[-1][0] < parsed[0][0] else "forward"
    segments = []
    for eta, chart, c in parsed:
        if not segments or segments[-1].chart != chart:
            seg = Trajectory(chart, direction, [], [], [], "csv")
            if segments:
                junction = _to_chart(segments[-1].chart, chart, segments[-1].points[-1])
                if junction is not None:
                    seg.taus.append(0.0)
                    seg.points.append(junction)
            segments.append(seg)
        seg = segments[-1]
        if seg.points:
            prev = seg.points[-1]
            rate = 0.5 * (abs(eta_rate(chart, prev[:3])) + abs(eta_rate(chart, c)))
            dtau = abs(eta - prev[3]) / rate if rate > 0 else 0.0
            seg.taus.append(seg.taus[-1] + dtau)
        else:
            seg.taus.append(0.0)
        seg.points.append([c[0], c[1], c[2], eta])
    return Orbit(segments, [], None, None, direction)


def _to_chart(src: Chart, dst: Chart, pt) -> list | None:
    """The junction sample of a handoff, re-expressed in the next chart."""
    try:
        X, Y, Z = to_finite(src, pt[:3])
        _, c = from_finite(dst, X, Y, Z)
    except BlowupLabError:
        return None
    return [c[0], c[1], c[2], pt[3]]


# ----------------------------------------------------------------- profiles


def write_profile_csv(curve, target) -> None:
    _write(target, PROFILE_COLUMNS,
           ([_num(a), _num(b), _num(c)] for a, b, c in zip(curve.xi, curve.f, curve.fprime)))


def read_profile_csv(source) -> tuple:
    rows = _read(source, PROFILE_COLUMNS)
    return tuple(np.array([float(r[k]) for r in rows]) for k in PROFILE_COLUMNS)


# ----------------------------------------------------------------- helpers


def _write(target, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    if hasattr(target, "write"):
        target.write(buf.getvalue())
    else:
        Path(target).write_text(buf.getvalue())


def _read(source, header) -> list:
    text = source.read() if hasattr(source, "read") else Path(source).read_text()
    reader = csv.DictReader(io.StringIO(text))
    missing = set(header) - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"CSV lacks columns {sorted(missing)}")
    return list(reader)
