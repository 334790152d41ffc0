"""Omega-limit classification against a set of tracked sublevel components.

A component of the sublevel {f < c} is represented by an anchor point inside
it. A flow line belongs to the anchor's basin once it enters the ball of
radius ``proximity_radius`` around the anchor below level c; the radius is
kept under the anchor's distance to the level set, so that ball lies inside
the component.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import Functional, Tolerances, Vector, as_vector
from .errors import InvalidAtlas
from .flow import FlowTrajectory, StopCondition, StopReason, integrate_flow

__all__ = [
    "ComponentAtlas",
    "OmegaVerdict",
    "Outcome",
    "boundary_value_check",
    "classify_omega",
    "level_set_distance",
]


class Outcome(enum.Enum):
    InComponent = "in_component"
    NotInTrackedComponent = "not_in_tracked_component"
    Indeterminate = "indeterminate"


@dataclass(frozen=True)
class ComponentAtlas:
    """Anchors (one per tracked component) of the sublevel at ``level_c``.

    ``escape_level`` optionally declares a value below which no tracked
    component is entered; flows dropping under it are classified as not in a
    tracked component without waiting for them to diverge.
    """

    level_c: float
    anchors: tuple[tuple[int, Vector], ...]
    proximity_radius: float
    escape_level: float = -math.inf

    def __post_init__(self):
        if not self.proximity_radius > 0:
            raise InvalidAtlas("proximity_radius must be > 0")
        if not self.anchors:
            raise InvalidAtlas("an atlas needs at least one anchor")
        labels = [lab for lab, _ in self.anchors]
        if len(set(labels)) != len(labels):
            raise InvalidAtlas(f"duplicate anchor labels {labels}")
        pts = self.points
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                d = float(np.linalg.norm(pts[i] - pts[j]))
                if d <= 2.0 * self.proximity_radius:
                    raise InvalidAtlas(
                        f"anchors {labels[i]} and {labels[j]} are {d:.3g} apart, "
                        f"not more than 2 * radius = {2 * self.proximity_radius:.3g}"
                    )

    @property
    def points(self) -> np.ndarray:
        return np.array([p for _, p in self.anchors], dtype=np.float64)

    @property
    def labels(self) -> list[int]:
        return [lab for lab, _ in self.anchors]

    def anchor(self, label: int) -> Vector:
        for lab, p in self.anchors:
            if lab == label:
                return p
        raise KeyError(label)

    def nearest(self, x) -> tuple[int, float]:
        d = np.linalg.norm(self.points - np.asarray(x), axis=1)
        k = int(np.argmin(d))
        return self.anchors[k][0], float(d[k])

    def validate(self, f: Functional) -> "ComponentAtlas":
        """Check every anchor lies strictly below ``level_c``."""
        for lab, p in self.anchors:
            v = f.value(p)
            if not v < self.level_c:
                raise InvalidAtlas(f"anchor {lab} has f = {v} >= c = {self.level_c}")
        return self

    @classmethod
    def build(
        cls,
        f: Functional,
        level_c: float,
        anchors,
        radius: float | None = None,
        escape_level: float = -math.inf,
        seed: int = 0,
    ) -> "ComponentAtlas":
        """Atlas from ``anchors`` (a mapping label -> point, or pairs).

        Without an explicit ``radius`` the default is half the smallest
        pairwise anchor distance, capped by each anchor's estimated distance
        to the level set {f = c}.
        """
        items = anchors.items() if isinstance(anchors, dict) else anchors
        pairs = tuple((int(lab), as_vector(p, f.dim)) for lab, p in items)
        for lab, p in pairs:
            if not f.value(p) < level_c:
                raise InvalidAtlas(f"anchor {lab} has f = {f.value(p)} >= c = {level_c}")
        if radius is None:
            pts = [p for _, p in pairs]
            cap = min(level_set_distance(f, p, level_c, seed=seed) for p in pts)
            half = math.inf
            for i in range(len(pts)):
                for j in range(i + 1, len(pts)):
                    half = min(half, 0.5 * float(np.linalg.norm(pts[i] - pts[j])))
            # strict separation needs a hair below half the distance
            radius = min(cap, half * (1.0 - 1e-9))
            if not math.isfinite(radius):
                raise InvalidAtlas("cannot size the proximity radius; pass radius explicitly")
        return cls(float(level_c), pairs, float(radius), float(escape_level))


def level_set_distance(
    f: Functional, x, level: float, seed: int = 0, r_max: float = 1e3
) -> float:
    """Estimated distance from ``x`` (with f(x) < level) to {f >= level}.

    Searches along the coordinate axes and 2 * dim random directions, each by
    doubling from 1e-4 then bisecting. Directions that never reach the level
    within ``r_max`` are ignored.
    """
    x = as_vector(x, f.dim)
    rng = np.random.default_rng(seed)
    eye = np.eye(f.dim)
    rand = rng.standard_normal((2 * f.dim, f.dim))
    dirs = np.vstack((eye, -eye, rand / np.linalg.norm(rand, axis=1, keepdims=True)))
    best = math.inf
    for d in dirs:
        lo, hi = 0.0, 1e-4
        while hi <= r_max and f.value(x + hi * d) < level:
            lo, hi = hi, 2.0 * hi
        if hi > r_max:
            continue
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if f.value(x + mid * d) < level:
                lo = mid
            else:
                hi = mid
        best = min(best, lo)
    return best


@dataclass(frozen=True)
class OmegaVerdict:
    outcome: Outcome
    label: int | None
    witness: FlowTrajectory
    flow_lines_used: int = 1
    diagnostic: str = ""

    def is_in(self, label: int) -> bool:
        return self.outcome is Outcome.InComponent and self.label == label

    @property
    def tag(self) -> str:
        if self.outcome is Outcome.InComponent:
            return f"in:{self.label}"
        return self.outcome.value


def classify_omega(f: Functional, x, atlas: ComponentAtlas, tol: Tolerances) -> OmegaVerdict:
    """Flow from ``x`` and report which tracked component it falls into.

    The flow stops on entering an anchor ball below ``level_c`` (that ball lies
    in the anchor's component, so the limit does too), on dropping under the
    atlas escape level, on settling, or at the time budget.
    """
    stop = StopCondition(
        settle=True,
        escape=atlas.escape_level,
        anchors=atlas.points,
        radius=atlas.proximity_radius,
        anchor_level=atlas.level_c,
    )
    traj = integrate_flow(f, x, tol, stop)
    reason = traj.stop_reason
    end = traj.x[-1]
    if reason is StopReason.SublevelEntered:
        label, dist = atlas.nearest(end)
        if traj.f[-1] < atlas.level_c and dist <= atlas.proximity_radius:
            return OmegaVerdict(Outcome.InComponent, label, traj)
        return OmegaVerdict(
            Outcome.NotInTrackedComponent, None, traj, diagnostic="escaped below the atlas escape level"
        )
    if reason is StopReason.SettledAtCritical:
        label, dist = atlas.nearest(end)
        if traj.f[-1] < atlas.level_c and dist <= atlas.proximity_radius:
            return OmegaVerdict(Outcome.InComponent, label, traj)
        return OmegaVerdict(
            Outcome.NotInTrackedComponent,
            None,
            traj,
            diagnostic=f"settled at f = {traj.f[-1]:.6g}, |grad| = {traj.g[-1]:.3g}",
        )
    if reason is StopReason.NonFinite:
        return OmegaVerdict(
            Outcome.Indeterminate, None, traj, diagnostic=f"non-finite flow after t = {traj.t[-1]:.6g}"
        )
    return OmegaVerdict(
        Outcome.Indeterminate,
        None,
        traj,
        diagnostic=f"time budget {traj.t[-1]:.6g} exhausted at f = {traj.f[-1]:.6g}",
    )


def boundary_value_check(
    f: Functional, boundary_pts, atlas: ComponentAtlas, tol: Tolerances, t_early: float = 1.0
) -> list[float]:
    """Minimum of f over the first ``t_early`` of each point's forward flow.

    Points on the boundary of a basin stay at f >= c along their flow, so the
    caller compares these values with ``atlas.level_c`` minus a slack.
    """
    out = []
    for p in boundary_pts:
        traj = integrate_flow(f, p, tol, StopCondition.at_time(t_early))
        out.append(float(np.min(traj.f)))
    return out
