"""Self-similar blow-up profiles of u_t = Δu^m + |x|^σ u^p through a 3-D phase space.

Submodules: ``params`` (admissible exponents), ``systems`` (vector fields
and charts), ``critical`` (equilibria), ``odeint`` (adaptive integrator),
``orbits`` (seeds, chart handoffs, fates), ``shooting`` (parameter scans and
bisection), ``barriers`` (flux signs across invariant surfaces),
``profiles`` (f(ξ) and local behaviors) and ``cli``.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import BlowupLabError
from .params import ParamSet, derive, validate

__all__ = ["BlowupLabError", "ParamSet", "derive", "validate", "__version__"]
