"""Parameter quadruples (m, p, N, sigma) and the exponents derived from them.

Inputs given as ``int`` or :class:`fractions.Fraction` are kept exact, so the
derived constants of a rational quadruple are exact rationals too.  Anything
else is converted to ``float``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Any, Mapping, Union

from .errors import RangeViolation

Number = Union[int, float, Fraction]


def _coerce(value: Any) -> Number:
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, (int, Fraction)):
        return value
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    return float(value)


@dataclass(frozen=True)
class ParamSet:
    """Exponents of u_t = Δu^m + |x|^σ u^p in dimension N."""

    m: Number
    p: Number
    N: int
    sigma: Number

    @property
    def exact(self) -> bool:
        return all(isinstance(v, (int, Fraction)) for v in (self.m, self.p, self.sigma))

    @property
    def p_is_one(self) -> bool:
        return self.p == 1

    def as_tuple(self) -> tuple[float, float, int, float]:
        return float(self.m), float(self.p), int(self.N), float(self.sigma)

    def to_json(self) -> dict:
        def enc(v):
            if isinstance(v, Fraction) and v.denominator != 1:
                return float(v)
            return int(v) if isinstance(v, (int, Fraction)) else float(v)

        return {"m": enc(self.m), "p": enc(self.p), "N": int(self.N), "sigma": enc(self.sigma)}

    def with_sigma(self, sigma: Number) -> "ParamSet":
        return validate((self.m, self.p, self.N, sigma))

    def derived(self) -> "DerivedExponents":
        return derive(self)


@dataclass(frozen=True)
class DerivedExponents:
    alpha: Number
    beta: Number
    L: Number
    gamma0: Number
    pc: Number
    phi: Number
    Y0: Number

    def as_float(self) -> "DerivedExponents":
        return DerivedExponents(*(float(v) for v in (self.alpha, self.beta, self.L, self.gamma0,
                                                        self.pc, self.phi, self.Y0)))


def validate(raw) -> ParamSet:
    """Build a :class:`ParamSet`, raising :class:`RangeViolation` on bad input.

    ``raw`` is a ``(m, p, N, sigma)`` sequence or a mapping with those keys.
    """
    if isinstance(raw, Mapping):
        unknown = set(raw) - {"m", "p", "N", "sigma"}
        if unknown:
            raise RangeViolation("m", f"unknown parameter keys: {sorted(unknown)}")
        try:
            raw = (raw["m"], raw["p"], raw["N"], raw["sigma"])
        except KeyError as exc:
            raise RangeViolation("m", f"missing parameter {exc.args[0]!r}") from None
    m, p, N, sigma = (_coerce(v) for v in raw)
    if isinstance(N, float):
        if not N.is_integer():
            raise RangeViolation("N_sigma", f"dimension must be an integer, got {N}")
        N = int(N)
    N = int(N)
    if not m > 1:
        raise RangeViolation("m", f"need m > 1, got m = {m}")
    if not (1 <= p < m):
        raise RangeViolation("p", f"need 1 <= p < m, got p = {p}, m = {m}")
    if p == 1 and not sigma > 0:
        raise RangeViolation("p1_sigma", f"p = 1 requires sigma > 0, got sigma = {sigma}")
    if not sigma > -2 * (p - 1) / (m - 1):
        raise RangeViolation(
            "sigma_lower", f"need sigma > -2(p-1)/(m-1) = {float(-2 * (p - 1) / (m - 1)):.6g}, got {sigma}")
    if N < 1 or not N + sigma > 0:
        raise RangeViolation("N_sigma", f"need N >= 1 and N + sigma > 0, got N = {N}, sigma = {sigma}")
    if p == 1:
        p = 1
    return ParamSet(m, p, N, sigma)


def derive(ps: ParamSet) -> DerivedExponents:
    """Closed-form exponents; exact when the quadruple is rational."""
    m, p, N, s = ps.m, ps.p, ps.N, ps.sigma
    if ps.exact:
        m, p, s = Fraction(m), Fraction(p), Fraction(s)
    L = s * (m - 1) + 2 * (p - 1)
    alpha = (s + 2) / L
    beta = (m - p) / L
    gamma0 = math.inf if ps.p_is_one else 1 / (alpha * (p - 1))
    pc = (m * N + s + 2) / (N + s + 2)
    phi = alpha * (m * N - N + 2)
    Y0 = (m - 1) / 2
    return DerivedExponents(alpha, beta, L, gamma0, pc, phi, Y0)


def from_json(text: str) -> ParamSet:
    return validate(json.loads(text))


def pc_of(m: Number, N: int, sigma: Number) -> float:
    """Critical reaction exponent separating the two barrier constructions."""
    return (m * N + sigma + 2) / (N + sigma + 2)
