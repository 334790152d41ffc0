"""Benchmark functionals with known critical structure.

``double_well`` has two minima separated by one saddle, ``tilted_hat`` has an
annular sublevel (non-simply-connected) with two minima and two saddles, and
``bvp_action`` is the discretized action of u'' + u^3 = 0 on (0, 1) with
Dirichlet ends, whose mountain-pass point is the positive solution.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from ._accel import HAVE_NUMBA, grad_kernel, kernel, value_kernel
from .core import Functional, PathCurve, Vector, closed_form, segment
from .errors import BadDimension, ConfigError, EpsOutOfRange

__all__ = [
    "BenchmarkSpec",
    "bvp_action",
    "by_name",
    "double_well",
    "names",
    "tilted_hat",
]


@dataclass(frozen=True)
class BenchmarkSpec:
    """A functional plus its declared critical points and run defaults.

    ``default_path`` joins the first minimizer to a point of another sublevel
    component; ``escape_level`` (when finite) marks values no tracked
    component reaches, letting classification stop flows that run to -inf.
    """

    name: str
    functional: Functional
    minimizers: list[tuple[Vector, float]]
    saddles: list[tuple[Vector, float]]
    recommended_c: float
    default_path: PathCurve
    obstacle: Vector | None = None
    escape_level: float = -math.inf
    notes: dict = field(default_factory=dict)


@value_kernel(cache=True)
def _dw_value(x):
    return (x[0] * x[0] - 1.0) ** 2 + x[1] * x[1]


@grad_kernel(cache=True)
def _dw_grad(x):
    g = np.empty(2)
    g[0] = 4.0 * x[0] * (x[0] * x[0] - 1.0)
    g[1] = 2.0 * x[1]
    return g


def double_well() -> BenchmarkSpec:
    """f(x, y) = (x^2 - 1)^2 + y^2."""
    f = Functional(2, _dw_value, _dw_grad, "double_well")
    return BenchmarkSpec(
        name="double_well",
        functional=f,
        minimizers=[(np.array([-1.0, 0.0]), 0.0), (np.array([1.0, 0.0]), 0.0)],
        saddles=[(np.array([0.0, 0.0]), 1.0)],
        recommended_c=0.5,
        default_path=segment([-1.0, 0.3], [1.0, 0.3]),
    )


@functools.lru_cache(maxsize=None)
def _hat_kernels(eps: float):
    @value_kernel
    def value(x):
        r2 = x[0] * x[0] + x[1] * x[1] - 1.0
        return r2 * r2 + eps * x[0] * x[0]

    @grad_kernel
    def grad(x):
        r2 = x[0] * x[0] + x[1] * x[1] - 1.0
        g = np.empty(2)
        g[0] = 4.0 * x[0] * r2 + 2.0 * eps * x[0]
        g[1] = 4.0 * x[1] * r2
        return g

    return value, grad


def _hat_arc(s):
    return np.array([1.05 * math.sin(math.pi * s), math.cos(math.pi * s)])


def _unit_circle(s):
    return np.array([math.sin(2.0 * math.pi * s), math.cos(2.0 * math.pi * s)])


def tilted_hat(eps: float = 0.1) -> BenchmarkSpec:
    """g(x, y) = (x^2 + y^2 - 1)^2 + eps x^2 for 0 < eps < 1.

    Minima (0, +-1) at 0, saddles (+-sqrt(1 - eps/2), 0) at eps - eps^2/4,
    local maximum at the origin. Levels in (eps, 1) give an annular
    sublevel around the origin; levels in (0, eps - eps^2/4) split it in two.
    """
    eps = float(eps)
    if not 0.0 < eps < 1.0:
        raise EpsOutOfRange(f"eps must lie in (0, 1), got {eps}")
    value, grad = _hat_kernels(eps)
    xs = math.sqrt(1.0 - eps / 2.0)
    level = eps - eps * eps / 4.0
    return BenchmarkSpec(
        name=f"tilted_hat:{eps:g}",
        functional=Functional(2, value, grad, f"tilted_hat:{eps:g}"),
        minimizers=[(np.array([0.0, 1.0]), 0.0), (np.array([0.0, -1.0]), 0.0)],
        saddles=[(np.array([xs, 0.0]), level), (np.array([-xs, 0.0]), level)],
        recommended_c=0.5 * level,
        default_path=closed_form(_hat_arc, 2),
        obstacle=np.zeros(2),
        notes={"loop_c": 0.5 * (eps + 1.0), "loop": closed_form(_unit_circle, 2)},
    )


# bvp_action: J(u) = sum_{i=0..n} (u_{i+1}-u_i)^2/(2h) - sum_{i=1..n} h u_i^4/4


@kernel(cache=True)
def _bvp_value_loop(u, h):
    n = u.shape[0]
    kin = u[0] * u[0] + u[n - 1] * u[n - 1]
    pot = 0.0
    for i in range(n - 1):
        d = u[i + 1] - u[i]
        kin += d * d
    for i in range(n):
        u2 = u[i] * u[i]
        pot += u2 * u2
    return kin / (2.0 * h) - h * pot / 4.0


@kernel(cache=True)
def _bvp_grad_loop(u, h):
    n = u.shape[0]
    g = np.empty(n)
    for i in range(n):
        left = u[i - 1] if i > 0 else 0.0
        right = u[i + 1] if i < n - 1 else 0.0
        g[i] = (2.0 * u[i] - left - right) / h - h * u[i] * u[i] * u[i]
    return g


def _bvp_value_np(u, h):
    w = np.concatenate(([0.0], u, [0.0]))
    return float(np.sum(np.diff(w) ** 2) / (2.0 * h) - h * np.sum(u**4) / 4.0)


def _bvp_grad_np(u, h):
    w = np.concatenate(([0.0], u, [0.0]))
    return (2.0 * u - w[:-2] - w[2:]) / h - h * u**3


@functools.lru_cache(maxsize=None)
def _bvp_kernels(n: int):
    h = 1.0 / (n + 1)
    if HAVE_NUMBA:

        @value_kernel
        def value(u):
            return _bvp_value_loop(u, h)

        @grad_kernel
        def grad(u):
            return _bvp_grad_loop(u, h)

    else:

        def value(u):
            return _bvp_value_np(u, h)

        def grad(u):
            return _bvp_grad_np(u, h)

    return value, grad


def bvp_action(n: int = 63, p: int = 3) -> BenchmarkSpec:
    """Discretized action of u'' + u^3 = 0, u(0) = u(1) = 0, on n interior nodes."""
    if int(n) != n or n < 3:
        raise BadDimension(f"need n >= 3 interior nodes, got {n}")
    if p != 3:
        raise BadDimension(f"only the cubic nonlinearity p = 3 is provided, got {p}")
    n = int(n)
    value, grad = _bvp_kernels(n)
    grid = np.arange(1, n + 1) / (n + 1)
    far = 6.0 * np.sin(np.pi * grid)
    return BenchmarkSpec(
        name=f"bvp:{n}",
        functional=Functional(n, value, grad, f"bvp:{n}"),
        minimizers=[(np.zeros(n), 0.0)],
        saddles=[],
        recommended_c=1.0,
        default_path=segment(np.zeros(n), far),
        escape_level=-1.0,
        notes={"grid": grid},
    )


def names() -> list[str]:
    return ["double_well", "tilted_hat:<eps>", "bvp:<n>"]


def by_name(name: str) -> BenchmarkSpec:
    """Look up ``double_well``, ``tilted_hat[:eps]`` or ``bvp[:n]``."""
    key, _, arg = name.strip().partition(":")
    try:
        if key == "double_well" and not arg:
            return double_well()
        if key == "tilted_hat":
            return tilted_hat(float(arg) if arg else 0.1)
        if key == "bvp":
            return bvp_action(int(arg) if arg else 63)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad benchmark argument in {name!r}: {exc}") from None
    raise ConfigError(f"unknown benchmark {name!r}; known: {', '.join(names())}")
