"""Independent ground truth: shooting method for u'' + u^3 = 0, u(0) = u(1) = 0.

The positive solution is found by bracketing the initial slope a with u(1; a)
of alternating sign (the first zero of u moves left as a grows) and solving
with ``scipy.optimize.brentq``. Its action is J = int u'^2 / 2 - u^4 / 4.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq


def _shoot(a: float, dense: bool = False):
    return solve_ivp(
        lambda t, y: (y[1], -y[0] ** 3),
        (0.0, 1.0),
        (0.0, a),
        rtol=1e-12,
        atol=1e-12,
        dense_output=dense,
    )


@lru_cache(maxsize=None)
def positive_solution():
    """(slope, dense solution) of the one-bump solution."""
    def end(a):
        return _shoot(a).y[0, -1]

    a_lo, a_hi = 1.0, 2.0
    while end(a_hi) > 0:
        a_lo, a_hi = a_hi, 2.0 * a_hi
    a = brentq(end, a_lo, a_hi, xtol=1e-14, rtol=1e-14)
    return a, _shoot(a, dense=True).sol


def continuum_action() -> float:
    _, sol = positive_solution()
    val, _ = quad(lambda t: 0.5 * sol(t)[1] ** 2 - 0.25 * sol(t)[0] ** 4, 0.0, 1.0, limit=200)
    return float(val)


def grid_profile(n: int) -> np.ndarray:
    """The continuum solution sampled on the n interior nodes."""
    _, sol = positive_solution()
    return np.ascontiguousarray(sol(np.arange(1, n + 1) / (n + 1))[0])
