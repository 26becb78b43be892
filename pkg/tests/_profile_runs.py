"""Orbit runs shared by the profile tests and the acceptance suite."""

from __future__ import annotations

from functools import lru_cache

from blowup_lab.odeint import IntegrationConfig
from blowup_lab.orbits import FateConfig, run_orbit, seed_backward_from_P1, seed_from_P0, seed_from_P2, seed_from_Q1
from blowup_lab.params import validate
from blowup_lab.profiles import reconstruct

REF = (3, 2, 3, 0.2)


@lru_cache(maxsize=None)
def curve(kind: str, raw: tuple = REF, arg: float = 1.0):
    ps = validate(raw)
    if kind == "P2":
        # short fine-stepped run so the lowest decade holds enough samples
        orbit = run_orbit(ps, seed_from_P2(ps), IntegrationConfig(max_step=0.25, max_eta=200))
    elif kind == "P0":
        orbit = run_orbit(ps, seed_from_P0(ps, arg))
    elif kind == "Q1":
        orbit = run_orbit(ps, seed_from_Q1(ps, arg), IntegrationConfig(max_step=0.05, max_eta=50))
    elif kind == "tail":
        orbit = run_orbit(ps, seed_from_P2(ps), IntegrationConfig(max_eta=1e7), FateConfig(delta=1e-6))
    elif kind == "interface":
        orbit = run_orbit(ps, seed_backward_from_P1(ps, arg))
    else:
        raise ValueError(kind)
    return orbit, reconstruct(ps, orbit)
