"""Points, functionals, paths and run tolerances."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import EndpointMismatch, NonFinite

Vector = np.ndarray


def as_vector(x, dim: int | None = None) -> Vector:
    """Copy ``x`` into a finite 1-D float64 array, optionally checking its size."""
    v = np.array(x, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise ValueError("vector must have at least one coordinate")
    if dim is not None and v.size != dim:
        raise ValueError(f"expected {dim} coordinates, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise NonFinite(f"non-finite coordinates in {v!r}")
    return v


@dataclass(frozen=True)
class Functional:
    """A smooth map f: R^n -> R together with its gradient.

    ``value`` and ``grad`` must be deterministic. When both are numba
    dispatchers (see :func:`mountpass._accel.kernel`) flow integration runs
    fully compiled.
    """

    dim: int
    value: Callable[[Vector], float]
    grad: Callable[[Vector], Vector]
    label: str = "f"

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError("dim must be >= 1")

    def grad_norm(self, x) -> float:
        return float(np.linalg.norm(self.grad(x)))


@dataclass(frozen=True)
class StepControl:
    """Integrator accuracy parameters.

    With ``fixed_step`` the integrator advances by ``h_fixed`` every step and
    skips error control, which makes traces reproducible bit for bit.
    """

    rtol: float = 1e-8
    atol: float = 1e-10
    h_init: float = 1e-3
    h_max: float = 0.25
    fixed_step: bool = False
    h_fixed: float = 0.01

    def __post_init__(self):
        for name in ("rtol", "atol", "h_init", "h_max", "h_fixed"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")

    @property
    def accuracy(self) -> float:
        return self.atol + self.rtol


@dataclass(frozen=True)
class Tolerances:
    grad_tol: float = 1e-6
    step_ctrl: StepControl = field(default_factory=StepControl)
    t_budget: float = 200.0
    settle_tol: float = 1e-8
    sep_eps: float = 1e-4
    n_max: int = 30

    def __post_init__(self):
        for name in ("grad_tol", "t_budget", "settle_tol", "sep_eps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if int(self.n_max) < 1:
            raise ValueError("n_max must be >= 1")


class PathCurve:
    """A continuous path [0, 1] -> R^n.

    Two shapes exist. A polyline holds nodes ``(s_k, p_k)`` with strictly
    increasing ``s`` from 0 to 1 and interpolates linearly between them. A
    closed-form path wraps an evaluator ``s -> point``. Build them with
    :func:`polyline`, :func:`segment`, :func:`constant` or :func:`closed_form`.
    """

    __slots__ = ("kind", "s", "points", "_fn", "dim")

    def __init__(self, kind, dim, s=None, points=None, fn=None):
        self.kind = kind
        self.dim = dim
        self.s = s
        self.points = points
        self._fn = fn

    def __call__(self, s: float) -> Vector:
        s = float(s)
        if not 0.0 <= s <= 1.0:
            raise ValueError(f"path parameter {s} outside [0, 1]")
        if self.kind == "closed":
            return as_vector(self._fn(s), self.dim)
        if s == 1.0:
            return self.points[-1].copy()
        k = int(np.searchsorted(self.s, s, side="right")) - 1
        w = (s - self.s[k]) / (self.s[k + 1] - self.s[k])
        if w == 0.0:
            return self.points[k].copy()
        return self.points[k] + w * (self.points[k + 1] - self.points[k])

    @property
    def start(self) -> Vector:
        return self(0.0)

    @property
    def end(self) -> Vector:
        return self(1.0)

    def sample(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Evaluate on ``n`` uniform parameters, returning (s, points)."""
        s = np.linspace(0.0, 1.0, n)
        return s, np.array([self(v) for v in s])

    def nodes(self, n: int = 257) -> tuple[np.ndarray, np.ndarray]:
        """Polyline nodes as stored, or a uniform sample of a closed-form path."""
        if self.kind == "polyline":
            return self.s.copy(), self.points.copy()
        return self.sample(n)

    def max_jump(self, n: int = 1025) -> float:
        """Largest distance between consecutive uniform samples; continuity spot check."""
        _, pts = self.sample(n)
        return float(np.max(np.linalg.norm(np.diff(pts, axis=0), axis=1)))

    def restrict(self, a: float, b: float) -> "PathCurve":
        """The sub-path s -> self(a + (b - a) s)."""
        if not 0.0 <= a < b <= 1.0:
            raise ValueError(f"bad sub-interval [{a}, {b}]")
        if self.kind == "closed":
            fn = self._fn
            return closed_form(lambda s: fn(a + (b - a) * s), self.dim)
        inner = (self.s > a) & (self.s < b)
        s = np.concatenate(([a], self.s[inner], [b]))
        pts = np.vstack([self(a), self.points[inner], self(b)])
        return PathCurve("polyline", self.dim, (s - a) / (b - a), pts)

    def reverse(self) -> "PathCurve":
        return path_reverse(self)

    def juxtapose(self, other: "PathCurve", tol: float = 1e-8) -> "PathCurve":
        return path_juxtapose(self, other, tol)

    def __repr__(self):
        if self.kind == "polyline":
            return f"PathCurve(polyline, dim={self.dim}, nodes={len(self.s)})"
        return f"PathCurve(closed, dim={self.dim})"


def polyline(points, s=None) -> PathCurve:
    """Polyline through ``points``; uniform parameters unless ``s`` is given."""
    pts = np.array(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if len(pts) < 2:
        raise ValueError("a polyline needs at least two nodes")
    if not np.all(np.isfinite(pts)):
        raise NonFinite("non-finite polyline node")
    if s is None:
        s = np.linspace(0.0, 1.0, len(pts))
    s = np.array(s, dtype=np.float64)
    if s.shape != (len(pts),) or s[0] != 0.0 or s[-1] != 1.0 or np.any(np.diff(s) <= 0):
        raise ValueError("polyline parameters must increase strictly from 0 to 1")
    return PathCurve("polyline", pts.shape[1], s, pts)


def segment(a, b) -> PathCurve:
    return polyline([as_vector(a), as_vector(b)])


def constant(p) -> PathCurve:
    p = as_vector(p)
    return polyline([p, p])


def closed_form(fn: Callable[[float], Vector], dim: int) -> PathCurve:
    return PathCurve("closed", int(dim), fn=fn)


def path_reverse(g: PathCurve) -> PathCurve:
    """The path s -> g(1 - s)."""
    if g.kind == "polyline":
        return PathCurve("polyline", g.dim, (1.0 - g.s)[::-1].copy(), g.points[::-1].copy())
    fn = g._fn
    return closed_form(lambda s: fn(1.0 - s), g.dim)


def path_juxtapose(g1: PathCurve, g2: PathCurve, tol: float = 1e-8) -> PathCurve:
    """Run ``g1`` on [0, 1/2] and ``g2`` on [1/2, 1].

    The junction takes the value ``g1(1)``; ``g2(0)`` may differ from it by at
    most ``tol``.
    """
    gap = float(np.linalg.norm(g1.end - g2.start))
    if gap > tol:
        raise EndpointMismatch(f"g1(1) and g2(0) are {gap:.3g} apart (tol {tol:.3g})")
    if g1.kind == "polyline" and g2.kind == "polyline":
        s = np.concatenate((0.5 * g1.s, 0.5 + 0.5 * g2.s[1:]))
        pts = np.vstack((g1.points, g2.points[1:]))
        return PathCurve("polyline", g1.dim, s, pts)

    def fn(s):
        if s <= 0.5:
            return g1(2.0 * s)
        return g2(2.0 * s - 1.0)

    return closed_form(fn, g1.dim)


def audit_gradient(f: Functional, x, h: float = 1e-5) -> float:
    """Max coordinate gap between ``f.grad`` and a central-difference gradient."""
    if not h > 0:
        raise ValueError("h must be > 0")
    x = as_vector(x, f.dim)
    g = np.asarray(f.grad(x), dtype=np.float64)
    fd = np.empty(f.dim)
    for i in range(f.dim):
        e = np.zeros(f.dim)
        e[i] = h
        fd[i] = (f.value(x + e) - f.value(x - e)) / (2.0 * h)
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(fd))):
        raise NonFinite(f"non-finite value or gradient near {x!r}")
    return float(np.max(np.abs(fd - g)))
