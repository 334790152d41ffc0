"""Normalized steepest-descent flow x' = -grad f(x) / (1 + |grad f(x)|).

Integration is an adaptive Dormand-Prince 5(4) scheme with a fixed-step mode
for reproducible traces. Every accepted step is stored as a sample carrying
(t, x, f(x), |grad f(x)|). Steps that raise f by more than the integrator
accuracy are rejected and halved, so stored f values are nonincreasing up to
that slack.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import _accel
from ._accel import function_pointer, kernel, predicate_kernel
from .core import Functional, Tolerances, Vector, as_vector
from .errors import GammaOutOfRange, NonFinite

__all__ = [
    "FlowSample",
    "FlowTrajectory",
    "StopCondition",
    "StopReason",
    "advect",
    "crossing_time",
    "extract_ps_sample",
    "integrate_flow",
    "lemma1_bound_check",
    "state_at",
]


class StopReason(enum.Enum):
    SettledAtCritical = 0
    SublevelEntered = 1
    BudgetExhausted = 2
    NonFinite = 3
    PredicateMet = 4


@dataclass(frozen=True)
class FlowSample:
    t: float
    x: Vector
    f_val: float
    grad_norm: float


@dataclass(frozen=True)
class StopCondition:
    """When to stop a flow line, besides running out of time.

    ``level``: stop once f <= level. ``escape``: stop once f < escape.
    ``anchors``/``radius``/``anchor_level``: stop once f < anchor_level and
    the state is within ``radius`` of some anchor row. ``settle``: stop when
    |grad f| < settle_tol and f dropped by less than settle_tol**2 over the
    last unit of flow time. ``t_end`` overrides the tolerance time budget and
    is hit exactly. ``predicate(t, x, f, gnorm)`` is a custom test.
    """

    settle: bool = False
    level: float = -np.inf
    escape: float = -np.inf
    anchors: np.ndarray | None = None
    radius: float = 0.0
    anchor_level: float = -np.inf
    t_end: float | None = None
    predicate: Callable | None = None

    @classmethod
    def settled(cls, **kw) -> "StopCondition":
        return cls(settle=True, **kw)

    @classmethod
    def below(cls, level: float, **kw) -> "StopCondition":
        return cls(level=float(level), **kw)

    @classmethod
    def at_time(cls, t: float, **kw) -> "StopCondition":
        return cls(t_end=float(t), **kw)

    @classmethod
    def when(cls, predicate: Callable, **kw) -> "StopCondition":
        return cls(predicate=predicate, **kw)


class FlowTrajectory:
    """Sampled orbit of the flow, stored column-wise.

    ``t``, ``f`` and ``g`` are 1-D arrays, ``x`` is (samples, dim).
    """

    __slots__ = ("t", "x", "f", "g", "stop_reason")

    def __init__(self, t, x, f, g, stop_reason: StopReason):
        self.t = t
        self.x = x
        self.f = f
        self.g = g
        self.stop_reason = stop_reason

    def __len__(self):
        return len(self.t)

    @property
    def start(self) -> Vector:
        return self.x[0]

    def sample(self, i: int) -> FlowSample:
        return FlowSample(float(self.t[i]), self.x[i].copy(), float(self.f[i]), float(self.g[i]))

    @property
    def samples(self) -> list[FlowSample]:
        return [self.sample(i) for i in range(len(self))]

    @property
    def last(self) -> FlowSample:
        return self.sample(len(self) - 1)

    @property
    def max_step(self) -> float:
        return float(np.max(np.diff(self.t))) if len(self) > 1 else 0.0

    def __repr__(self):
        return (
            f"FlowTrajectory(samples={len(self)}, t_end={self.t[-1]:.6g}, "
            f"f_end={self.f[-1]:.6g}, stop={self.stop_reason.name})"
        )


# Dormand-Prince 5(4) tableau.
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

_SETTLED, _SUBLEVEL, _BUDGET, _NONFINITE, _PREDICATE = 0, 1, 2, 3, 4
_H_MIN = 1e-13


@predicate_kernel(cache=True)
def _never(t, x, f, g):
    return False


_FLOW_SIG = (
    (
        _accel.VALUE_FN, _accel.GRAD_FN, _accel.PRED_FN, _accel.VEC, _accel.F64,
        _accel.F64, _accel.F64, _accel.F64, _accel.F64, _accel.BOOL, _accel.F64,
        _accel.F64, _accel.F64, _accel.MAT, _accel.F64, _accel.F64,
        _accel.BOOL, _accel.F64, _accel.F64,
    )
    if _accel.HAVE_NUMBA
    else None
)


@kernel(sig=_FLOW_SIG, cache=True)
def _flow_kernel(
    value, grad, predicate, x0, t_end,
    rtol, atol, h_init, h_max, fixed, h_fixed,
    level, escape, anchors, radius, anchor_level,
    settle, settle_tol, mono_slack,
):
    dim = x0.shape[0]
    cap = 256
    ts = np.empty(cap)
    xs = np.empty((cap, dim))
    fs = np.empty(cap)
    gs = np.empty(cap)

    x = x0.copy()
    fx = value(x)
    g = grad(x)
    gn = np.sqrt(np.sum(g * g))
    k1 = -g / (1.0 + gn)
    if not (np.isfinite(fx) and np.isfinite(gn)):
        return ts[:0], xs[:0], fs[:0], gs[:0], _NONFINITE
    ts[0] = 0.0
    xs[0] = x
    fs[0] = fx
    gs[0] = gn
    n = 1
    t = 0.0
    win = 0
    h = h_fixed if fixed else min(h_init, h_max)
    n_anchor = anchors.shape[0]
    r2 = radius * radius

    while True:
        # stop tests on the newest sample
        if fx <= level or fx < escape:
            return ts[:n], xs[:n], fs[:n], gs[:n], _SUBLEVEL
        if n_anchor > 0 and fx < anchor_level:
            for a in range(n_anchor):
                d = x - anchors[a]
                if np.sum(d * d) <= r2:
                    return ts[:n], xs[:n], fs[:n], gs[:n], _SUBLEVEL
        if settle and gn < settle_tol:
            while win + 1 < n and ts[win + 1] <= t - 1.0:
                win += 1
            # roundoff floor: f cannot resolve drops below a few ulps
            if fs[win] - fx < settle_tol * settle_tol + 4.0 * 2.2e-16 * abs(fx):
                return ts[:n], xs[:n], fs[:n], gs[:n], _SETTLED
        if predicate(t, x, fx, gn):
            return ts[:n], xs[:n], fs[:n], gs[:n], _PREDICATE
        if t >= t_end:
            return ts[:n], xs[:n], fs[:n], gs[:n], _BUDGET

        # one accepted step
        while True:
            last = False
            if t + h >= t_end:
                h = t_end - t
                last = True
            g = grad(x + h * (_A21 * k1))
            k2 = -g / (1.0 + np.sqrt(np.sum(g * g)))
            g = grad(x + h * (_A31 * k1 + _A32 * k2))
            k3 = -g / (1.0 + np.sqrt(np.sum(g * g)))
            g = grad(x + h * (_A41 * k1 + _A42 * k2 + _A43 * k3))
            k4 = -g / (1.0 + np.sqrt(np.sum(g * g)))
            g = grad(x + h * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4))
            k5 = -g / (1.0 + np.sqrt(np.sum(g * g)))
            g = grad(x + h * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5))
            k6 = -g / (1.0 + np.sqrt(np.sum(g * g)))
            xn = x + h * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
            fn = value(xn)
            g = grad(xn)
            gnn = np.sqrt(np.sum(g * g))
            k7 = -g / (1.0 + gnn)
            if not (np.isfinite(fn) and np.isfinite(gnn) and np.all(np.isfinite(xn))):
                if fixed or h <= _H_MIN:
                    return ts[:n], xs[:n], fs[:n], gs[:n], _NONFINITE
                h *= 0.5
                continue
            mono = fn <= fx + mono_slack * (1.0 + abs(fx))
            if fixed:
                err = 0.0
            else:
                e = h * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6 + _E7 * k7)
                sc = atol + rtol * np.maximum(np.abs(x), np.abs(xn))
                err = np.sqrt(np.sum((e / sc) ** 2) / dim)
            if err <= 1.0 and mono:
                break
            if h <= _H_MIN:
                # step size underflow: the field is not resolvable here
                return ts[:n], xs[:n], fs[:n], gs[:n], _NONFINITE
            if err > 1.0:
                h *= max(0.2, 0.9 * err ** -0.2)
            else:
                h *= 0.5

        t = t_end if last else t + h
        x = xn
        fx = fn
        k1 = k7
        gn = gnn
        if n == cap:
            cap *= 2
            ts2 = np.empty(cap)
            xs2 = np.empty((cap, dim))
            fs2 = np.empty(cap)
            gs2 = np.empty(cap)
            ts2[:n] = ts
            xs2[:n] = xs
            fs2[:n] = fs
            gs2[:n] = gs
            ts, xs, fs, gs = ts2, xs2, fs2, gs2
        ts[n] = t
        xs[n] = x
        fs[n] = fx
        gs[n] = gn
        n += 1

        if fixed:
            h = h_fixed
        elif err == 0.0:
            h = min(h * 5.0, h_max)
        else:
            h = min(h * min(5.0, max(0.2, 0.9 * err ** -0.2)), h_max)


def _uses_compiled(f: Functional, predicate) -> bool:
    return (
        function_pointer(f.value, _accel.VALUE_SIG)
        and function_pointer(f.grad, _accel.GRAD_SIG)
        and function_pointer(predicate, _accel.PRED_SIG)
    )


def integrate_flow(f: Functional, x0, tol: Tolerances, stop: StopCondition | None = None) -> FlowTrajectory:
    """Integrate the normalized flow from ``x0`` until ``stop`` fires.

    The time budget is ``stop.t_end`` when set, else ``tol.t_budget``; it is
    landed on exactly. A non-finite value or gradient ends the trajectory at
    the last good sample with ``StopReason.NonFinite``; only a non-finite
    starting point raises :class:`NonFinite`.
    """
    stop = stop or StopCondition()
    x0 = as_vector(x0, f.dim)
    sc = tol.step_ctrl
    t_end = tol.t_budget if stop.t_end is None else float(stop.t_end)
    if t_end < 0:
        raise ValueError("t_end must be >= 0")
    anchors = (
        np.zeros((0, f.dim))
        if stop.anchors is None
        else np.ascontiguousarray(np.asarray(stop.anchors, dtype=np.float64).reshape(-1, f.dim))
    )
    predicate = _never if stop.predicate is None else stop.predicate
    args = (
        x0, t_end,
        sc.rtol, sc.atol, sc.h_init, sc.h_max, sc.fixed_step, sc.h_fixed,
        float(stop.level), float(stop.escape), anchors, float(stop.radius),
        float(stop.anchor_level), bool(stop.settle), float(tol.settle_tol),
        10.0 * sc.accuracy,
    )
    if _uses_compiled(f, predicate):
        out = _flow_kernel(f.value, f.grad, predicate, *args)
    else:
        py = getattr(predicate, "py_func", predicate)
        out = _flow_kernel.py_func(_py_value(f.value), _py_grad(f.grad), py, *args)
    ts, xs, fs, gs, code = out
    if len(ts) == 0:
        raise NonFinite(f"f or grad f is not finite at the start point {x0!r}")
    return FlowTrajectory(ts, xs, fs, gs, StopReason(int(code)))


def _py_value(fn):
    return lambda x: float(fn(x))


def _py_grad(fn):
    return lambda x: np.asarray(fn(x), dtype=np.float64)


def lemma1_bound_check(traj: FlowTrajectory, gamma: float) -> tuple[float, float]:
    """Time spent with |grad f| >= gamma against 2 (f(start) - f(end)) / gamma**2.

    Each sample interval counts fully when the mean of its endpoint gradient
    norms reaches ``gamma``.
    """
    if not 0.0 < gamma <= 1.0:
        raise GammaOutOfRange(f"gamma must lie in (0, 1], got {gamma}")
    if len(traj) < 2:
        raise ValueError("need at least two samples")
    mid = 0.5 * (traj.g[1:] + traj.g[:-1])
    measured = float(np.sum(np.diff(traj.t)[mid >= gamma]))
    bound = 2.0 * (traj.f[0] - traj.f[-1]) / gamma**2
    return measured, float(bound)


def extract_ps_sample(traj: FlowTrajectory) -> FlowSample:
    """The sample with the smallest gradient norm."""
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    return traj.sample(int(np.argmin(traj.g)))


def crossing_time(traj: FlowTrajectory, level: float) -> float | None:
    """First time f <= level, by linear interpolation between samples."""
    hit = np.flatnonzero(traj.f <= level)
    if hit.size == 0:
        return None
    k = int(hit[0])
    if k == 0:
        return 0.0
    f0, f1 = traj.f[k - 1], traj.f[k]
    t0, t1 = traj.t[k - 1], traj.t[k]
    if f0 == f1:
        return float(t1)
    return float(t0 + (f0 - level) / (f0 - f1) * (t1 - t0))


def advect(f: Functional, x, t: float, tol: Tolerances) -> Vector:
    """eta(t, x), landing exactly on ``t``."""
    if t <= 0:
        return as_vector(x, f.dim)
    traj = integrate_flow(f, x, tol, StopCondition.at_time(t))
    if traj.stop_reason is StopReason.NonFinite:
        raise NonFinite(f"flow from {x!r} broke down before t={t}")
    return traj.x[-1].copy()


def state_at(f: Functional, traj: FlowTrajectory, t: float, tol: Tolerances) -> Vector:
    """eta(t, start) recovered from the stored sample just before ``t``."""
    k = int(np.searchsorted(traj.t, t, side="right")) - 1
    k = max(0, min(k, len(traj) - 1))
    if traj.t[k] == t:
        return traj.x[k].copy()
    return advect(f, traj.x[k], t - traj.t[k], tol)


def with_budget(tol: Tolerances, t_budget: float) -> Tolerances:
    return replace(tol, t_budget=t_budget)
