from __future__ import annotations

import io
import math

import numpy as np
import pytest

from blowup_lab.odeint import IntegrationConfig
from blowup_lab.orbits import FateConfig, FateKind, classify, forward_from_P2
from blowup_lab.params import validate
from blowup_lab.profiles import reconstruct
from blowup_lab.serialize import (dumps, plain, read_orbit_csv, read_profile_csv, write_orbit_csv,
                                  write_profile_csv)

PS = validate((3, 2, 3, 0.2))


@pytest.fixture(scope="module")
def orbit():
    return forward_from_P2(PS)


@pytest.mark.parametrize("sigma", [0.2, 20.0])
def test_orbit_csv_round_trip_is_exact(sigma):
    ob = forward_from_P2(validate((3, 2, 3, sigma)))
    first = io.StringIO()
    write_orbit_csv(ob, first)
    back = read_orbit_csv(io.StringIO(first.getvalue()))
    assert [s.chart for s in back.segments] == [s.chart for s in ob.segments]
    second = io.StringIO()
    write_orbit_csv(back, second)
    assert second.getvalue() == first.getvalue()


def test_replayed_orbit_keeps_fate(orbit):
    buf = io.StringIO()
    write_orbit_csv(orbit, buf)
    back = read_orbit_csv(io.StringIO(buf.getvalue()))
    assert back.direction == "forward"
    assert classify(back, PS, FateConfig()).kind == FateKind.ENTERS_PGAMMA0


def test_profile_csv_round_trip(tmp_path):
    ob = forward_from_P2(PS, IntegrationConfig(max_eta=200.0, max_step=0.25))
    curve = reconstruct(PS, ob)
    path = tmp_path / "profile.csv"
    write_profile_csv(curve, path)
    xi, f, fp = read_profile_csv(path)
    assert np.array_equal(xi, curve.xi)
    assert np.array_equal(f, curve.f)
    assert np.array_equal(fp, curve.fprime)


def test_missing_column_raises():
    with pytest.raises(ValueError, match="lacks columns"):
        read_orbit_csv(io.StringIO("eta,c1,c2,c3\n0,1,2,3\n"))
    with pytest.raises(ValueError):
        read_orbit_csv(io.StringIO("eta,chart_id,c1,c2,c3\n"))


def test_plain_handles_special_values():
    out = plain({"a": math.inf, "b": np.float64(math.nan), "c": FateKind.ENTERS_Q3,
                 "d": np.arange(3), "e": (np.bool_(True), None), 4: 1 + 2j})
    assert out == {"a": "inf", "b": "nan", "c": "Enters_Q3", "d": [0, 1, 2],
                   "e": [True, None], "4": {"re": 1.0, "im": 2.0}}


def test_dumps_is_sorted_and_stable():
    s = dumps({"b": 1, "a": [0.1, 2]})
    assert s == dumps({"a": [0.1, 2], "b": 1})
    assert s.index('"a"') < s.index('"b"')
    assert s.endswith("\n")
