"""Mountain passes from non-contractible loops.

When the sublevel around a strict local minimizer x_bar has a hole, a loop
based at x_bar that winds around it cannot be shrunk inside the sublevel.
Conjugating a path with the flow-generated "descending paths" of its ends
turns it into a loop at x_bar (its descending loop); a path is
eta-contractible when that loop is contractible. Halving a non-contractible
loop keeps a non-contractible half, so bisection either finds a point whose
flow leaves the basin of x_bar or squeezes onto a critical point.

Contractibility is decided through a homotopy invariant; the shipped one is
the planar winding number about an obstacle point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._accel import kernel, pick
from .basin import ComponentAtlas, OmegaVerdict, Outcome, classify_omega
from .core import (
    Functional,
    PathCurve,
    Tolerances,
    Vector,
    as_vector,
    constant,
    path_juxtapose,
    path_reverse,
    polyline,
    segment,
)
from .errors import (
    BudgetExhausted,
    ContractibleLoop,
    InvalidEndpoints,
    NotInBasin,
    OracleInconsistent,
)
from .flow import StopCondition, StopReason, integrate_flow
from .mpbisect import MpCandidate, RunReport, Termination, run_alg1b

__all__ = [
    "Alg2Report",
    "HomotopyOracle",
    "StrictMinContext",
    "descending_loop",
    "descending_path",
    "is_eta_contractible",
    "min_curvature",
    "run_alg2",
    "run_thm_mp2",
    "winding_number",
    "winding_oracle",
]


@dataclass(frozen=True)
class StrictMinContext:
    """A strict local minimizer and the neighbourhood descending paths aim for.

    Flows are considered to have reached x_bar once they are within
    ``ball_r`` of it with f below ``entry_level = c_bar + eps_nbhd``.
    """

    x_bar: Vector
    c_bar: float
    eps_nbhd: float
    ball_r: float

    def __post_init__(self):
        if not self.eps_nbhd > 0 or not self.ball_r > 0:
            raise ValueError("eps_nbhd and ball_r must be > 0")

    @property
    def entry_level(self) -> float:
        return self.c_bar + self.eps_nbhd

    @classmethod
    def at(cls, f: Functional, x_bar, eps_nbhd: float, ball_r: float) -> "StrictMinContext":
        x_bar = as_vector(x_bar, f.dim)
        return cls(x_bar, float(f.value(x_bar)), float(eps_nbhd), float(ball_r))

    def validate(self, f: Functional, tol: Tolerances, level_c: float | None = None) -> "StrictMinContext":
        g = f.grad_norm(self.x_bar)
        if not g < tol.settle_tol:
            raise ValueError(f"|grad f(x_bar)| = {g:.3g} is not below settle_tol")
        if level_c is not None and not self.entry_level < level_c:
            raise ValueError(f"entry level {self.entry_level} must lie below c = {level_c}")
        return self

    def atlas(self, label: int = 0) -> ComponentAtlas:
        """Single-anchor atlas whose one component is the entry neighbourhood of x_bar."""
        return ComponentAtlas(self.entry_level, ((label, self.x_bar),), self.ball_r)


@dataclass(frozen=True)
class HomotopyOracle:
    """An integer loop invariant: additive under juxtaposition, odd under reversal."""

    invariant: Callable[[PathCurve], int]
    description: str = ""


@kernel(cache=True)
def _angle_sum_loop(pts, ox, oy):
    total = 0.0
    for i in range(pts.shape[0] - 1):
        ax = pts[i, 0] - ox
        ay = pts[i, 1] - oy
        bx = pts[i + 1, 0] - ox
        by = pts[i + 1, 1] - oy
        total += math.atan2(ax * by - ay * bx, ax * bx + ay * by)
    return total


def _angle_sum_np(pts, ox, oy):
    a = pts[:-1] - (ox, oy)
    b = pts[1:] - (ox, oy)
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    dot = np.einsum("ij,ij->i", a, b)
    return float(np.sum(np.arctan2(cross, dot)))


_angle_sum = pick(_angle_sum_loop, _angle_sum_np)


def _closed_form_points(path: PathCurve, o, axes, max_nodes: int = 1 << 20) -> np.ndarray:
    """Samples of a closed-form path fine enough that no step turns more than pi/8 about ``o``."""
    s = np.linspace(0.0, 1.0, 257)
    pts = np.array([path(v)[list(axes)] for v in s])
    while True:
        rel = pts - o
        ang = np.arctan2(rel[:, 1], rel[:, 0])
        d = np.abs(np.angle(np.exp(1j * np.diff(ang))))
        bad = np.flatnonzero(d > math.pi / 8)
        if bad.size == 0 or len(s) + bad.size > max_nodes:
            return pts
        mids = 0.5 * (s[bad] + s[bad + 1])
        new = np.array([path(v)[list(axes)] for v in mids])
        s = np.insert(s, bad + 1, mids)
        pts = np.insert(pts, bad + 1, new, axis=0)


def winding_number(path: PathCurve, obstacle, axes=(0, 1)) -> float:
    """Signed angle swept by ``path`` about ``obstacle``, in turns (unrounded).

    The plane is spanned by coordinates ``axes``. Polylines are summed exactly
    node to node; closed-form paths are sampled adaptively.
    """
    o = np.asarray(obstacle, dtype=np.float64).reshape(-1)
    if o.size != 2:
        o = o[list(axes)]
    if path.kind == "polyline":
        pts = np.ascontiguousarray(path.points[:, list(axes)])
    else:
        pts = np.ascontiguousarray(_closed_form_points(path, o, axes))
    return _angle_sum(pts, float(o[0]), float(o[1])) / (2.0 * math.pi)


def winding_oracle(obstacle, axes=(0, 1)) -> HomotopyOracle:
    obstacle = np.asarray(obstacle, dtype=np.float64)

    def invariant(loop: PathCurve) -> int:
        return int(round(winding_number(loop, obstacle, axes)))

    return HomotopyOracle(invariant, f"winding number about {obstacle.tolist()} in axes {tuple(axes)}")


def descending_path(f: Functional, x1, ctx: StrictMinContext, tol: Tolerances) -> PathCurve:
    """Flow from ``x1`` into the entry neighbourhood of x_bar, then straight to x_bar.

    The flow part is the polyline of stored samples reparametrized affinely
    from [0, T] to [0, 1].
    """
    x1 = as_vector(x1, f.dim)
    if np.array_equal(x1, ctx.x_bar):
        return constant(ctx.x_bar)
    stop = StopCondition(
        settle=True,
        anchors=ctx.x_bar[None, :],
        radius=ctx.ball_r,
        anchor_level=ctx.entry_level,
    )
    traj = integrate_flow(f, x1, tol, stop)
    end = traj.x[-1]
    near = np.linalg.norm(end - ctx.x_bar) <= ctx.ball_r and traj.f[-1] < ctx.entry_level
    if not (traj.stop_reason in (StopReason.SublevelEntered, StopReason.SettledAtCritical) and near):
        raise NotInBasin(
            f"flow from {x1.tolist()} ends at {end.tolist()} ({traj.stop_reason.name}), "
            f"not in the entry neighbourhood of x_bar"
        )
    T = float(traj.t[-1])
    flow_part = constant(x1) if T == 0.0 else polyline(traj.x, traj.t / T)
    if np.array_equal(end, ctx.x_bar):
        return flow_part
    return path_juxtapose(flow_part, segment(end, ctx.x_bar))


def descending_loop(
    f: Functional, gamma: PathCurve, ctx: StrictMinContext, tol: Tolerances, cache: dict | None = None
) -> PathCurve:
    """reverse(desc(gamma(0))) * gamma * desc(gamma(1)): a loop based at x_bar.

    ``cache`` maps a point's bytes to its descending path, letting callers
    reuse descents of shared endpoints.
    """

    def desc(x):
        if cache is None:
            return descending_path(f, x, ctx, tol)
        key = np.asarray(x, dtype=np.float64).tobytes()
        if key not in cache:
            cache[key] = descending_path(f, x, ctx, tol)
        return cache[key]

    d0 = desc(gamma.start)
    d1 = desc(gamma.end)
    return path_juxtapose(path_juxtapose(path_reverse(d0), gamma), d1)


def is_eta_contractible(
    f: Functional,
    gamma: PathCurve,
    ctx: StrictMinContext,
    oracle: HomotopyOracle,
    tol: Tolerances,
    cache: dict | None = None,
) -> bool:
    return oracle.invariant(descending_loop(f, gamma, ctx, tol, cache)) == 0


@dataclass
class Alg2Step:
    iter: int
    a: float
    b: float
    m: float
    x: Vector
    verdict: str
    invariant_first: int | None = None
    invariant_second: int | None = None


@dataclass
class Alg2Report:
    """Outcome of loop bisection.

    ``stopped`` means a midpoint whose flow does not return to x_bar was
    found (``found_point``, ``verdict``). Otherwise [a, b] is the final
    parameter bracket and ``bracket_points`` its images.
    """

    stopped: bool
    found_point: Vector | None
    verdict: OmegaVerdict | None
    a: float
    b: float
    bracket_points: tuple[Vector, Vector]
    steps: list[Alg2Step] = field(default_factory=list)
    flow_lines: int = 0
    flagged: bool = False
    invariant: int = 0


def run_alg2(
    f: Functional,
    gamma: PathCurve,
    ctx: StrictMinContext,
    oracle: HomotopyOracle,
    atlas: ComponentAtlas | None,
    tol: Tolerances,
) -> Alg2Report:
    """Halve a non-contractible loop at x_bar until a midpoint leaves its basin.

    A midpoint counts as returning to x_bar when it classifies into the atlas
    component anchored nearest x_bar; anything else, Indeterminate included
    (then ``flagged``), stops the loop. Otherwise the first half is kept if it
    is not eta-contractible, the second half if it is.
    """
    atlas = atlas if atlas is not None else ctx.atlas()
    label, dist = atlas.nearest(ctx.x_bar)
    if dist > atlas.proximity_radius:
        raise InvalidEndpoints("no atlas anchor sits at x_bar")
    for end in (gamma.start, gamma.end):
        if np.linalg.norm(end - ctx.x_bar) > tol.settle_tol:
            raise InvalidEndpoints(f"loop must start and end at x_bar, got endpoint {end.tolist()}")
    inv = oracle.invariant(gamma)
    if inv == 0:
        raise ContractibleLoop("input loop has zero invariant; loop bisection needs a non-contractible loop")
    cache: dict = {}
    a, b = 0.0, 1.0
    lines = 0
    steps: list[Alg2Step] = []
    for i in range(int(tol.n_max)):
        m = 0.5 * (a + b)
        x = gamma(m)
        v = classify_omega(f, x, atlas, tol)
        lines += 1
        step = Alg2Step(i, a, b, m, x, v.tag)
        steps.append(step)
        if not v.is_in(label):
            return Alg2Report(
                True, x, v, a, b, (gamma(a), gamma(b)), steps, lines,
                flagged=v.outcome is Outcome.Indeterminate, invariant=inv,
            )
        n_cached = len(cache)
        first = oracle.invariant(descending_loop(f, gamma.restrict(a, m), ctx, tol, cache))
        step.invariant_first = first
        if first != 0:
            b = m
        else:
            second = oracle.invariant(descending_loop(f, gamma.restrict(m, b), ctx, tol, cache))
            step.invariant_second = second
            if second == 0:
                raise OracleInconsistent(
                    f"both halves of [{a}, {b}] have zero invariant while the loop does not"
                )
            a = m
        lines += len(cache) - n_cached
    return Alg2Report(False, None, None, a, b, (gamma(a), gamma(b)), steps, lines, invariant=inv)


def min_curvature(f: Functional, x, seed: int = 0, h: float | None = None) -> float:
    """Smallest second difference of f at ``x`` along the coordinate axes and 2 * dim random unit directions."""
    x = as_vector(x, f.dim)
    h = 1e-4 * max(1.0, float(np.linalg.norm(x))) if h is None else h
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((2 * f.dim, f.dim))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    d = np.vstack((np.eye(f.dim), d))
    f0 = f.value(x)
    return float(min((f.value(x + h * u) - 2.0 * f0 + f.value(x - h * u)) / (h * h) for u in d))


def run_thm_mp2(
    f: Functional,
    gamma: PathCurve,
    ctx: StrictMinContext,
    oracle: HomotopyOracle,
    atlas: ComponentAtlas | None,
    tol: Tolerances,
    seed: int = 0,
    curvature_tol: float = 1e-6,
) -> RunReport:
    """Loop bisection followed by path bisection toward the critical point it reveals.

    A stopping midpoint x flows to some limit w. If w is not a local
    minimizer (a negative directional curvature at w) it is returned as the
    candidate. Otherwise x_bar and w anchor a two-component atlas at level
    max(f(x_bar), f(w)) + eps_nbhd and path bisection runs along the piece of
    the loop from its last basin point to x.
    """
    rep2 = run_alg2(f, gamma, ctx, oracle, atlas, tol)
    if not rep2.stopped:
        a_pt, b_pt = rep2.bracket_points
        return RunReport(
            [], None, rep2.flow_lines, Termination.BudgetExhausted, ctx.entry_level,
            note=f"loop bisection kept [{rep2.a!r}, {rep2.b!r}] with ends {a_pt.tolist()} and "
            f"{b_pt.tolist()} without leaving the basin of x_bar",
            loop=rep2,
        )
    v = rep2.verdict
    w = v.witness.x[-1].copy()
    if v.outcome is Outcome.Indeterminate:
        raise BudgetExhausted(f"midpoint {rep2.found_point.tolist()} has no settled limit: {v.diagnostic}")
    if min_curvature(f, w, seed) < -curvature_tol:
        cand = MpCandidate(
            y_tilde=w, f_val=float(f.value(w)), grad_norm=f.grad_norm(w), T_i=float(v.witness.t[-1]),
            T_tilde_i=float(v.witness.t[-1]), bracket_width=rep2.b - rep2.a,
            flow_lines_used=rep2.flow_lines,
        )
        return RunReport([cand], cand, rep2.flow_lines, Termination.GradTolMet
                         if cand.grad_norm < tol.grad_tol else Termination.BudgetExhausted,
                         ctx.entry_level, note="limit of the stopping midpoint is not a minimizer",
                         loop=rep2)
    level = max(ctx.c_bar, float(f.value(w))) + ctx.eps_nbhd
    pair = ComponentAtlas.build(f, level, {1: ctx.x_bar, 2: w}, seed=seed)
    last = rep2.steps[-1]
    sub = gamma.restrict(last.a, last.m)
    rep = run_alg1b(f, sub, pair, tol, target=1, flow_lines0=rep2.flow_lines)
    rep.loop = rep2
    return rep
