import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mountpass import (
    HomotopyOracle,
    StrictMinContext,
    Termination,
    Tolerances,
    classify_omega,
    closed_form,
    constant,
    descending_loop,
    descending_path,
    is_eta_contractible,
    path_juxtapose,
    path_reverse,
    polyline,
    run_alg2,
    run_thm_mp2,
    segment,
    winding_number,
    winding_oracle,
)
from mountpass.errors import ContractibleLoop, NotInBasin, OracleInconsistent
from mountpass.loopmp import min_curvature

XBAR = np.array([0.0, 1.0])


@pytest.fixture(scope="module")
def ctx(hat):
    return StrictMinContext.at(hat.functional, XBAR, 0.01, 0.4)


@pytest.fixture(scope="module")
def oracle(hat):
    return winding_oracle(hat.obstacle)


def small_loop():
    # a loop at x_bar bulging upward; every point flows back to x_bar
    return closed_form(lambda s: XBAR + 0.1 * np.array([math.sin(2 * math.pi * s), 1 - math.cos(2 * math.pi * s)]), 2)


def test_context(hat, ctx, tol):
    assert ctx.c_bar == 0.0 and ctx.entry_level == 0.01
    ctx.validate(hat.functional, tol, 0.55)
    with pytest.raises(ValueError):
        ctx.validate(hat.functional, tol, 0.005)


def test_descending_path_at_minimizer(hat, ctx, tol):
    p = descending_path(hat.functional, XBAR, ctx, tol)
    for s in np.linspace(0, 1, 11):
        np.testing.assert_array_equal(p(s), XBAR)


def test_descending_path_radial(hat, ctx, tol):
    f = hat.functional
    x1 = np.array([0.0, 1.5])
    p = descending_path(f, x1, ctx, tol)
    np.testing.assert_array_equal(p(0), x1)
    np.testing.assert_array_equal(p(1), XBAR)
    _, pts = p.sample(201)
    assert np.all(pts[:, 0] == 0.0)
    vals = np.array([f.value(q) for q in pts])
    assert vals.max() <= f.value(x1) + ctx.eps_nbhd


def test_descending_path_wrong_basin(hat, ctx, tol):
    with pytest.raises(NotInBasin):
        descending_path(hat.functional, [0.0, -1.5], ctx, tol)


def test_descending_loop_of_based_loop(hat, ctx, tol):
    loop = hat.notes["loop"]
    d = descending_loop(hat.functional, loop, ctx, tol)
    for u in np.linspace(0, 1, 101):
        np.testing.assert_allclose(d(0.25 + 0.25 * u), loop(u), atol=1e-15)
    np.testing.assert_array_equal(d(0), XBAR)
    np.testing.assert_allclose(d(1), XBAR, atol=tol.settle_tol)


def test_descending_loop_closes_for_arcs(hat, ctx, tol):
    arc = closed_form(lambda s: np.array([0.3 * math.sin(s), 1.2 - 0.4 * s]), 2)
    d = descending_loop(hat.functional, arc, ctx, tol)
    np.testing.assert_allclose(d(0), XBAR, atol=tol.settle_tol)
    np.testing.assert_allclose(d(1), XBAR, atol=tol.settle_tol)


def test_descending_loop_needs_basin(hat, ctx, tol):
    with pytest.raises(NotInBasin):
        descending_loop(hat.functional, segment(XBAR, [0.0, -1.5]), ctx, tol)


def test_eta_contractibility(hat, ctx, oracle, tol):
    f = hat.functional
    assert not is_eta_contractible(f, hat.notes["loop"], ctx, oracle, tol)
    arc = closed_form(lambda s: np.array([math.sin(0.6 * s - 0.3), math.cos(0.6 * s - 0.3)]), 2)
    assert is_eta_contractible(f, arc, ctx, oracle, tol)
    assert is_eta_contractible(f, constant(XBAR), ctx, oracle, tol)


def test_alg2_stops_at_antipode(hat, ctx, oracle, tol):
    rep = run_alg2(hat.functional, hat.notes["loop"], ctx, oracle, None, tol)
    assert rep.stopped and len(rep.steps) == 1
    np.testing.assert_allclose(rep.found_point, [0, -1], atol=1e-15)
    np.testing.assert_allclose(rep.verdict.witness.x[-1], [0, -1], atol=1e-12)
    assert rep.invariant != 0


def test_alg2_reparametrized_loop(hat, ctx, oracle, tol):
    def lopsided(s):
        th = math.pi * s / 0.75 if s <= 0.75 else math.pi + math.pi * (s - 0.75) / 0.25
        return np.array([math.sin(th), math.cos(th)])

    rep = run_alg2(hat.functional, closed_form(lopsided, 2), ctx, oracle, None, tol)
    assert rep.stopped
    assert rep.found_point[1] < 0
    end = rep.verdict.witness.x[-1]
    assert np.linalg.norm(end - [0, -1]) < 1e-6


def test_alg2_rejects_contractible(hat, ctx, oracle, tol):
    with pytest.raises(ContractibleLoop):
        run_alg2(hat.functional, small_loop(), ctx, oracle, None, tol)
    with pytest.raises(ContractibleLoop):
        run_thm_mp2(hat.functional, small_loop(), ctx, oracle, None, tol)


def test_alg2_inconsistent_oracle(hat, ctx, tol):
    loop = small_loop()
    fake = HomotopyOracle(lambda g: 1 if g is loop else 0, "claims only the input loop is essential")
    with pytest.raises(OracleInconsistent):
        run_alg2(hat.functional, loop, ctx, fake, None, tol)


def test_alg2_progress_without_stop(hat, ctx):
    tol = Tolerances(n_max=12)
    always = HomotopyOracle(lambda g: 1, "everything is essential")
    rep = run_alg2(hat.functional, small_loop(), ctx, always, None, tol)
    assert not rep.stopped
    widths = [s.b - s.a for s in rep.steps]
    assert widths == [2.0**-i for i in range(12)]
    assert rep.b - rep.a == 2.0**-12
    starved = run_thm_mp2(hat.functional, small_loop(), ctx, always, None, tol)
    assert starved.termination is Termination.BudgetExhausted
    assert "without leaving" in starved.note


def test_min_curvature(hat):
    f = hat.functional
    assert min_curvature(f, [math.sqrt(0.95), 0.0]) < -1e-3
    assert min_curvature(f, [0.0, -1.0]) > 0


def test_thm_mp2_returns_saddle_limit_directly(dw, tol):
    # in the double well the whole line x = 0 flows to the saddle; a loop at (-1, 0)
    # around an obstacle at (-1, 0.5) whose midpoint sits on that line stops there
    ctx = StrictMinContext.at(dw.functional, [-1.0, 0.0], 0.01, 0.3)
    loop = polyline([[-1, 0], [0, 0.0], [0.0, 1.0], [-1.5, 1.0], [-1, 0]], s=[0, 0.25, 0.5, 0.75, 1])
    rep = run_thm_mp2(dw.functional, loop, ctx, winding_oracle([-0.5, 0.5]), None, tol)
    np.testing.assert_allclose(rep.best.y_tilde, [0, 0], atol=1e-6)
    assert rep.best.f_val == pytest.approx(1.0, abs=1e-9)


# oracle algebra on random polyline loops


def _random_loop(rng, base, n, turns):
    """Polyline loop at ``base`` sweeping ``turns`` times around the origin, or None."""
    ang0 = math.atan2(base[1], base[0])
    if turns:
        steps = rng.uniform(0.05, 1.0, n)
        steps = steps / steps.sum() * (2 * math.pi * turns)
    else:
        steps = rng.uniform(-0.9, 0.9, n)
        steps -= steps.mean()
    if np.max(np.abs(steps)) >= 0.9 * math.pi:
        return None
    ang = ang0 + np.concatenate(([0.0], np.cumsum(steps)))
    r = rng.uniform(0.3, 2.0, n + 1)
    pts = np.c_[r * np.cos(ang), r * np.sin(ang)]
    pts[0] = pts[-1] = base
    return polyline(pts)


def _clearance(loop, o=np.zeros(2)):
    p, q = loop.points[:-1] - o, loop.points[1:] - o
    d = q - p
    t = np.clip(-np.einsum("ij,ij->i", p, d) / np.maximum(np.einsum("ij,ij->i", d, d), 1e-300), 0, 1)
    return float(np.min(np.linalg.norm(p + t[:, None] * d, axis=1)))


@given(st.integers(0, 2**32 - 1), st.integers(-3, 3), st.integers(-3, 3))
def test_oracle_algebra(seed, k1, k2):
    rng = np.random.default_rng(seed)
    base = np.array([0.0, 1.0])
    g1 = _random_loop(rng, base, int(rng.integers(3, 30)) + 8 * abs(k1), k1)
    g2 = _random_loop(rng, base, int(rng.integers(3, 30)) + 8 * abs(k2), k2)
    if g1 is None or g2 is None or min(_clearance(g1), _clearance(g2)) < 1e-3:
        return
    w1, w2 = winding_number(g1, [0, 0]), winding_number(g2, [0, 0])
    assert abs(w1 - round(w1)) < 1e-6 and abs(w2 - round(w2)) < 1e-6
    inv = winding_oracle([0.0, 0.0]).invariant
    assert inv(g1) == k1 and inv(g2) == k2
    assert inv(path_juxtapose(g1, g2)) == inv(g1) + inv(g2)
    assert inv(path_reverse(g1)) == -inv(g1)
    assert inv(constant(base)) == 0


def test_winding_closed_form_circle(hat):
    assert winding_number(hat.notes["loop"], [0, 0]) == pytest.approx(-1.0, abs=1e-12)
    wide = closed_form(lambda s: np.array([3 * math.cos(4 * math.pi * s), math.sin(4 * math.pi * s)]), 2)
    assert winding_number(wide, [0, 0]) == pytest.approx(2.0, abs=1e-12)


def test_winding_in_higher_dimension():
    loop = polyline([[1, 5, 0, 7], [0, 5, 1, 7], [-1, 5, 0, 7], [0, 5, -1, 7], [1, 5, 0, 7]])
    assert winding_oracle([0, 0, 0, 0], axes=(0, 2)).invariant(loop) == 1


@given(st.floats(-0.6, 0.6), st.floats(-0.6, 0.6), st.floats(0.8, 1.3), st.floats(0.8, 1.3))
def test_arc_loops_eta_contractible(hat, ctx, oracle, tol, a0, a1, r0, r1):
    # sampled paths whose 33 sample points all flow to x_bar have a contractible descending loop
    f = hat.functional
    atlas = ctx.atlas()
    arc = closed_form(
        lambda s: ((1 - s) * r0 + s * r1) * np.array([math.sin((1 - s) * a0 + s * a1), math.cos((1 - s) * a0 + s * a1)]),
        2,
    )
    if not all(classify_omega(f, arc(s), atlas, tol).is_in(0) for s in np.linspace(0, 1, 33)):
        return
    loop = descending_loop(f, arc, ctx, tol)
    _, pts = loop.sample(513)
    if np.min(np.linalg.norm(pts, axis=1)) < 1e-3:
        return
    assert oracle.invariant(loop) == 0
