"""Bisection on basins: locate mountain-pass points between two sublevel components.

``run_alg1b`` bisects a path between a point of the target component and a
point outside its basin, and after each step extracts the point of smallest
gradient along the flow line from the inner bracket end. ``run_alg1c`` wraps
it in restarts: when the gradient target is missed, both bracket ends are
advected until their flow lines separate, and bisection resumes on the
segment joining them.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .basin import ComponentAtlas, OmegaVerdict, Outcome, classify_omega
from .core import Functional, PathCurve, Tolerances, Vector, as_vector, segment
from .errors import BracketDegenerate, InvalidEndpoints, LevelNotReached, SeparationFailed
from .flow import (
    FlowTrajectory,
    StopCondition,
    advect,
    crossing_time,
    integrate_flow,
)

__all__ = [
    "BisectState",
    "MpCandidate",
    "RunReport",
    "Termination",
    "bisect_step",
    "extract_candidate",
    "ps_from_below",
    "run_alg1b",
    "run_alg1c",
]

_EPS = np.finfo(float).eps


class Termination(enum.Enum):
    GradTolMet = "GradTolMet"
    BudgetExhausted = "BudgetExhausted"
    BracketDegenerate = "BracketDegenerate"


@dataclass(frozen=True, eq=False)
class BisectState:
    """Dyadic bracket [s1, s2] with ``x1`` in the target basin and ``x2`` outside it."""

    iter: int
    s1: float
    s2: float
    sm: float
    x1: Vector
    x2: Vector
    xm: Vector
    verdicts: tuple[str, str]
    target: int

    @property
    def width(self) -> float:
        return self.s2 - self.s1


@dataclass(frozen=True, eq=False)
class MpCandidate:
    y_tilde: Vector
    f_val: float
    grad_norm: float
    T_i: float
    T_tilde_i: float
    bracket_width: float
    flow_lines_used: int
    iter: int = 0
    round: int = 0
    s1: float = 0.0
    s2: float = 1.0
    f_x1: float = math.nan
    trace: FlowTrajectory | None = field(default=None, repr=False, compare=False)


@dataclass
class RunReport:
    candidates: list[MpCandidate]
    best: MpCandidate | None
    total_flow_lines: int
    termination: Termination
    level_c: float
    states: list[BisectState] = field(default_factory=list)
    rounds: int = 1
    note: str = ""
    loop: object = None

    @property
    def final_state(self) -> BisectState | None:
        return self.states[-1] if self.states else None


def initial_state(gamma: PathCurve, target: int, v1: str = "", v2: str = "") -> BisectState:
    return BisectState(0, 0.0, 1.0, 0.5, gamma(0.0), gamma(1.0), gamma(0.5), (v1, v2), target)


def bisect_step(
    f: Functional, gamma: PathCurve, state: BisectState, atlas: ComponentAtlas, tol: Tolerances
) -> tuple[BisectState, OmegaVerdict]:
    """Classify the midpoint and keep the half whose ends straddle the basin boundary.

    Indeterminate verdicts count as outside the target basin. Exactly one flow
    line is integrated.
    """
    scale = 64.0 * _EPS * max(1.0, float(np.linalg.norm(state.x1)))
    if float(np.linalg.norm(state.x1 - state.x2)) < scale:
        raise BracketDegenerate(
            f"bracket ends indistinct after {state.iter} steps (|x1 - x2| < {scale:.3g})"
        )
    v = classify_omega(f, state.xm, atlas, tol)
    if v.is_in(state.target):
        s1, s2, x1, x2 = state.sm, state.s2, state.xm, state.x2
        verdicts = (v.tag, state.verdicts[1])
    else:
        s1, s2, x1, x2 = state.s1, state.sm, state.x1, state.xm
        verdicts = (state.verdicts[0], v.tag)
    sm = 0.5 * (s1 + s2)
    return BisectState(state.iter + 1, s1, s2, sm, x1, x2, gamma(sm), verdicts, state.target), v


def _parabola_vertex(t, y) -> float | None:
    """Abscissa of the vertex of the parabola through three points, if convex."""
    (t0, t1, t2), (y0, y1, y2) = t, y
    d = (t1 - t0) * (y1 - y2) - (t1 - t2) * (y1 - y0)
    if d == 0.0:
        return None
    n = (t1 - t0) ** 2 * (y1 - y2) - (t1 - t2) ** 2 * (y1 - y0)
    tv = t1 - 0.5 * n / d
    return tv if t0 <= tv <= t2 else None


def extract_candidate(
    f: Functional, x1, level: float, tol: Tolerances, **meta
) -> tuple[MpCandidate, FlowTrajectory]:
    """Flow from ``x1`` down to ``level`` and return the point of least gradient.

    T_i is the first time f <= level (linear interpolation). T~_i is the
    sample argmin of |grad f| on [0, T_i], refined by a parabola through
    |grad f|^2 at the neighbouring samples.
    """
    x1 = as_vector(x1, f.dim)
    traj = integrate_flow(f, x1, tol, StopCondition.below(level))
    T = crossing_time(traj, level)
    if T is None:
        T = float(traj.t[-1])
    upto = int(np.searchsorted(traj.t, T, side="right"))
    k = int(np.argmin(traj.g[:upto]))
    t_best, y, g_best = float(traj.t[k]), traj.x[k].copy(), float(traj.g[k])
    if 0 < k < upto - 1:
        tv = _parabola_vertex(traj.t[k - 1 : k + 2], traj.g[k - 1 : k + 2] ** 2)
        if tv is not None and tv != traj.t[k]:
            base = k if tv > traj.t[k] else k - 1
            yv = advect(f, traj.x[base], tv - traj.t[base], tol)
            gv = f.grad_norm(yv)
            if gv < g_best:
                t_best, y, g_best = float(tv), yv, gv
    cand = MpCandidate(
        y_tilde=y,
        f_val=float(f.value(y)),
        grad_norm=g_best,
        T_i=float(T),
        T_tilde_i=min(t_best, float(T)),
        f_x1=float(traj.f[0]),
        trace=traj,
        **meta,
    )
    return cand, traj


def _classify_ends(f, gamma, atlas, tol, target):
    v0 = classify_omega(f, gamma(0.0), atlas, tol)
    if target is None:
        if v0.outcome is not Outcome.InComponent:
            raise InvalidEndpoints(f"path start is not in a tracked component ({v0.tag}; {v0.diagnostic})")
        target = v0.label
    elif not v0.is_in(target):
        raise InvalidEndpoints(f"path start classifies as {v0.tag}, not in:{target}")
    v1 = classify_omega(f, gamma(1.0), atlas, tol)
    if v1.is_in(target):
        raise InvalidEndpoints(f"both path ends lie in the basin of component {target}")
    return target, v0, v1


def run_alg1b(
    f: Functional,
    gamma: PathCurve,
    atlas: ComponentAtlas,
    tol: Tolerances,
    target: int | None = None,
    round_: int = 0,
    flow_lines0: int = 0,
) -> RunReport:
    """Bisection with per-step extraction of a near-critical point.

    ``target`` defaults to the component containing the limit of ``gamma(0)``.
    At most ``tol.n_max`` steps; stops early once the best gradient norm is
    below ``tol.grad_tol``.
    """
    target, v0, v1 = _classify_ends(f, gamma, atlas, tol, target)
    lines = flow_lines0 + 2
    state = initial_state(gamma, target, v0.tag, v1.tag)
    states = [state]
    cands: list[MpCandidate] = []
    best = None
    last_x1 = None
    termination = Termination.BudgetExhausted
    note = ""
    for _ in range(int(tol.n_max)):
        try:
            state, _v = bisect_step(f, gamma, state, atlas, tol)
        except BracketDegenerate as exc:
            termination, note = Termination.BracketDegenerate, str(exc)
            break
        lines += 1
        states.append(state)
        meta = dict(
            bracket_width=state.width, iter=state.iter, round=round_, s1=state.s1, s2=state.s2
        )
        if last_x1 is not None and state.s1 == last_x1.s1:
            # x1 did not move; its flow line is already known
            cand = replace(last_x1, flow_lines_used=lines, **meta)
        else:
            lines += 1
            cand, _ = extract_candidate(f, state.x1, atlas.level_c, tol, flow_lines_used=lines, **meta)
        last_x1 = cand
        cands.append(cand)
        if cand.T_i > 0 and (best is None or cand.grad_norm < best.grad_norm):
            best = cand
        if best is not None and best.grad_norm < tol.grad_tol:
            termination = Termination.GradTolMet
            break
    return RunReport(cands, best, lines, termination, atlas.level_c, states, note=note)


def separation_time(
    f: Functional, xa, xb, dist: float, tol: Tolerances
) -> tuple[float, Vector, Vector]:
    """First time the flow lines from ``xa`` and ``xb`` are ``dist`` apart.

    Both lines are integrated once; the crossing is located on the union of
    their sample times (linear interpolation) and refined by bisection on t
    with short advections from stored samples.
    """
    if float(np.linalg.norm(xa - xb)) >= dist:
        return 0.0, xa.copy(), xb.copy()
    stop = StopCondition.settled()
    ta = integrate_flow(f, xa, tol, stop)
    tb = integrate_flow(f, xb, tol, stop)
    t_hi = min(ta.t[-1], tb.t[-1])
    grid = np.union1d(ta.t[ta.t <= t_hi], tb.t[tb.t <= t_hi])

    def interp(tr, t):
        return np.array([np.interp(t, tr.t, tr.x[:, j]) for j in range(tr.x.shape[1])]).T

    gap = np.linalg.norm(interp(ta, grid) - interp(tb, grid), axis=1)
    hit = np.flatnonzero(gap >= dist)
    if hit.size == 0:
        raise SeparationFailed(
            f"flow lines stayed within {dist:.3g} of each other up to t = {t_hi:.6g}"
        )
    j = int(hit[0])

    def at(tr, t):
        k = max(0, int(np.searchsorted(tr.t, t, side="right")) - 1)
        return advect(f, tr.x[k], t - tr.t[k], tol)

    lo, hi = float(grid[j - 1]), float(grid[j])
    pa, pb = at(ta, hi), at(tb, hi)
    if np.linalg.norm(pa - pb) < dist:
        # interpolation was optimistic; walk forward on the exact states
        while hi < t_hi and np.linalg.norm(pa - pb) < dist:
            lo, hi = hi, min(t_hi, hi + (hi - lo) + 1e-3)
            pa, pb = at(ta, hi), at(tb, hi)
        if np.linalg.norm(pa - pb) < dist:
            raise SeparationFailed(f"flow lines never reached separation {dist:.3g}")
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        qa, qb = at(ta, mid), at(tb, mid)
        if np.linalg.norm(qa - qb) >= dist:
            hi, pa, pb = mid, qa, qb
        else:
            lo = mid
        if hi - lo < 1e-12 * max(1.0, hi):
            break
    return hi, pa, pb


def run_alg1c(
    f: Functional,
    x1,
    x2,
    joining: PathCurve | None,
    atlas: ComponentAtlas,
    tol: Tolerances,
    target: int | None = None,
) -> RunReport:
    """Bisection with deflection restarts.

    Round k runs :func:`run_alg1b` with budget ``n_max - k``. After a round
    that misses ``grad_tol`` the final bracket ends are advected to the time
    their flow lines are ``sep_eps / 2**k`` apart, and the next round bisects
    the segment joining them. A spent budget returns the best candidate so far
    with termination ``BudgetExhausted``.
    """
    x1 = as_vector(x1, f.dim)
    x2 = as_vector(x2, f.dim)
    if float(np.linalg.norm(x1 - x2)) == 0.0:
        raise InvalidEndpoints("x1 and x2 coincide")
    gamma = joining if joining is not None else segment(x1, x2)
    if np.linalg.norm(gamma.start - x1) > tol.settle_tol or np.linalg.norm(gamma.end - x2) > tol.settle_tol:
        raise InvalidEndpoints("joining path does not run from x1 to x2")
    budget = int(tol.n_max)
    cands: list[MpCandidate] = []
    states: list[BisectState] = []
    best = None
    lines = 0
    k = 0
    while True:
        rep = run_alg1b(f, gamma, atlas, replace(tol, n_max=budget), target, round_=k, flow_lines0=lines)
        target = rep.states[0].target
        lines = rep.total_flow_lines
        cands.extend(rep.candidates)
        states.extend(rep.states)
        if rep.best is not None and (best is None or rep.best.grad_norm < best.grad_norm):
            best = rep.best
        if best is not None and best.grad_norm < tol.grad_tol:
            return RunReport(cands, best, lines, Termination.GradTolMet, atlas.level_c, states, k + 1)
        budget -= 1
        if budget <= 0:
            return RunReport(
                cands, best, lines, Termination.BudgetExhausted, atlas.level_c, states, k + 1,
                note=f"budget spent after {k + 1} rounds; best |grad| = "
                f"{best.grad_norm if best else math.nan:.3g} > {tol.grad_tol:.3g}",
            )
        k += 1
        end = rep.final_state
        _, ya, yb = separation_time(f, end.x1, end.x2, tol.sep_eps / 2.0 ** (k - 1), tol)
        lines += 2
        gamma = segment(ya, yb)


def ps_from_below(
    f: Functional,
    report: RunReport,
    atlas: ComponentAtlas,
    tol: Tolerances,
    k: int,
    base: float | None = None,
) -> MpCandidate:
    """Crossing point of the flow from the final x1 with the level ``base - 1/k``.

    ``base`` defaults to the mountain-pass level estimate ``report.best.f_val``;
    as k grows the crossing moves toward the pass and its gradient norm decays
    like 1/sqrt(k). The crossing time is refined by Newton steps using
    df/dt = -|grad f|^2 / (1 + |grad f|).
    """
    if int(k) < 1:
        raise ValueError("k must be >= 1")
    state = report.final_state
    if state is None:
        raise ValueError("report has no bisection state")
    if base is None:
        if report.best is None:
            raise ValueError("report has no candidate to estimate the pass level from")
        base = report.best.f_val
    level = float(base) - 1.0 / k
    x1 = state.x1
    traj = integrate_flow(f, x1, tol, StopCondition.below(level, settle=True))
    T = crossing_time(traj, level)
    if T is None:
        raise LevelNotReached(
            f"flow from x1 stopped ({traj.stop_reason.name}) at f = {traj.f[-1]:.6g} > {level:.6g}"
        )
    j = max(0, int(np.searchsorted(traj.t, T, side="right")) - 1)
    t0, x0 = float(traj.t[j]), traj.x[j]
    t = T
    y = advect(f, x0, t - t0, tol)
    for _ in range(8):
        fy = f.value(y)
        gn = f.grad_norm(y)
        if abs(fy - level) <= 1e-12 * max(1.0, abs(level)) or gn == 0.0:
            break
        dt = (fy - level) * (1.0 + gn) / (gn * gn)
        t = max(t0, t + dt)
        y = advect(f, x0, t - t0, tol)
    return MpCandidate(
        y_tilde=y,
        f_val=float(f.value(y)),
        grad_norm=f.grad_norm(y),
        T_i=t,
        T_tilde_i=t,
        bracket_width=state.width,
        flow_lines_used=report.total_flow_lines + 1,
        iter=state.iter,
        s1=state.s1,
        s2=state.s2,
        f_x1=float(traj.f[0]),
        trace=traj,
    )
