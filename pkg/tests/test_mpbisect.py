import math

import numpy as np
import pytest

from mountpass import ComponentAtlas, Termination, Tolerances, bisect_step, ps_from_below, run_alg1b, run_alg1c, segment
from mountpass.basin import Outcome
from mountpass.errors import InvalidEndpoints, LevelNotReached
from mountpass.mpbisect import initial_state

PATH = segment([-1.0, 0.3], [1.0, 0.3])


@pytest.fixture(scope="module")
def dw_run(dw, dw_atlas):
    return run_alg1b(dw.functional, PATH, dw_atlas, Tolerances(n_max=30))


def test_first_two_steps(dw, dw_atlas, tol):
    f = dw.functional
    s0 = initial_state(PATH, 1)
    s1, v = bisect_step(f, PATH, s0, dw_atlas, tol)
    assert v.outcome is Outcome.NotInTrackedComponent
    assert (s1.s1, s1.s2) == (0.0, 0.5)
    np.testing.assert_allclose(s1.xm, [-0.5, 0.3])
    s2, v = bisect_step(f, PATH, s1, dw_atlas, tol)
    assert v.is_in(1)
    assert (s2.s1, s2.s2) == (0.25, 0.5)


def test_indeterminate_takes_else_branch(dw, dw_atlas):
    s0 = initial_state(PATH, 1)
    s1, v = bisect_step(dw.functional, PATH, s0, dw_atlas, Tolerances(t_budget=1e-3))
    assert v.outcome is Outcome.Indeterminate
    assert s1.s2 == 0.5


def test_state_invariants(dw_run):
    states = dw_run.states
    for i, s in enumerate(states):
        assert s.iter == i
        assert s.s2 - s.s1 == 2.0**-i
        assert s.sm == 0.5 * (s.s1 + s.s2)
        np.testing.assert_array_equal(s.x1, PATH(s.s1))
        np.testing.assert_array_equal(s.x2, PATH(s.s2))
        assert s.verdicts[0] == "in:1" and s.verdicts[1] != "in:1"
    assert all(b.s1 >= a.s1 and b.s2 <= a.s2 for a, b in zip(states, states[1:]))


def test_alg1b_double_well_locates_saddle(dw_run):
    b = dw_run.best
    assert np.linalg.norm(b.y_tilde) < 1e-3
    assert abs(b.f_val - 1.0) < 1e-3
    assert dw_run.total_flow_lines <= 2 * 30 + 2
    assert [c.flow_lines_used for c in dw_run.candidates] == sorted({c.flow_lines_used for c in dw_run.candidates})


def test_alg1b_gradient_follows_linearized_flow(dw_run):
    # near the saddle x' = 4x, y' = -2y, so from (x0, y0) the least |grad|^2 = 16 x^2 + 4 y^2
    # along the line is 3 (16 x0^2)^(1/3) (2 y0^2)^(2/3), so it shrinks only like x0^(1/3)
    x0 = abs(dw_run.final_state.x1[0])
    y0 = 0.3
    g_lin = math.sqrt(3 * (16 * x0**2) ** (1 / 3) * (2 * y0**2) ** (2 / 3))
    assert dw_run.best.grad_norm == pytest.approx(g_lin, rel=0.05)


def test_alg1b_tilted_hat(hat, tol):
    f = hat.functional
    atlas = ComponentAtlas.build(f, 0.05, {1: [0, 1], 2: [0, -1]})
    rep = run_alg1b(f, hat.default_path, atlas, tol)
    b = rep.best
    assert np.linalg.norm(b.y_tilde - [math.sqrt(0.95), 0]) < 1e-2
    assert b.f_val == pytest.approx(0.0975, abs=1e-3)


def test_alg1b_rejects_same_component(dw, dw_atlas, tol):
    with pytest.raises(InvalidEndpoints):
        run_alg1b(dw.functional, segment([-1, 0.3], [-1.2, 0.1]), dw_atlas, tol)
    with pytest.raises(InvalidEndpoints):
        run_alg1b(dw.functional, segment([0, 0.3], [1, 0.3]), dw_atlas, tol)


def test_bracket_degenerate_partial_report(dw, dw_atlas):
    rep = run_alg1b(dw.functional, PATH, dw_atlas, Tolerances(n_max=60))
    assert rep.termination is Termination.BracketDegenerate
    assert 40 < len(rep.candidates) < 60
    assert rep.best is not None


def test_gradient_time_bound_general_form(dw_run):
    # with normalized speed the energy identity gives gamma^2 / (1 + gamma) <= (f(x1) - c) / T
    c = dw_run.level_c
    for cand in dw_run.candidates:
        if cand.T_i > 0:
            g = cand.grad_norm
            assert g * g / (1 + g) <= (cand.f_x1 - c) / cand.T_i * 1.01
            if g <= 1:
                assert g <= math.sqrt(2 * (cand.f_x1 - c) / cand.T_i) * 1.01


def test_candidate_sandwich(dw, dw_run):
    top = max(dw.functional.value(PATH(s)) for s in np.linspace(0, 1, 1001))
    for cand in dw_run.candidates:
        assert 0 <= cand.T_tilde_i <= cand.T_i
        if cand.T_i > 0:  # x1 still inside the sublevel gives no candidate
            assert dw_run.level_c - 1e-6 <= cand.f_val <= top + 1e-6


def test_alg1c_restarts_to_tolerance(dw, dw_atlas):
    tol = Tolerances(grad_tol=1e-6, n_max=25, sep_eps=1e-4)
    f = dw.functional
    plain = run_alg1b(f, PATH, dw_atlas, tol)
    assert plain.termination is Termination.BudgetExhausted
    rep = run_alg1c(f, PATH.start, PATH.end, PATH, dw_atlas, tol)
    assert rep.termination is Termination.GradTolMet
    assert rep.rounds > 1
    assert rep.best.grad_norm < 1e-6
    assert np.linalg.norm(rep.best.y_tilde) < 1e-3
    lines = [c.flow_lines_used for c in rep.candidates]
    assert lines == sorted(lines) and rep.total_flow_lines >= lines[-1]


def test_alg1c_budget_starved(dw, dw_atlas):
    tol = Tolerances(grad_tol=1e-6, n_max=3)
    rep = run_alg1c(dw.functional, PATH.start, PATH.end, PATH, dw_atlas, tol)
    assert rep.termination is Termination.BudgetExhausted
    assert rep.best.grad_norm > tol.grad_tol


def test_alg1c_coincident_ends(dw, dw_atlas, tol):
    with pytest.raises(InvalidEndpoints):
        run_alg1c(dw.functional, [0.3, 0.3], [0.3, 0.3], None, dw_atlas, tol)


def test_ps_from_below_crossing(dw, dw_atlas, dw_run, tol):
    y = ps_from_below(dw.functional, dw_run, dw_atlas, tol, 100, base=0.5)
    assert y.f_val == pytest.approx(0.49, abs=1e-6)


def test_ps_from_below_decreasing(dw, dw_atlas, dw_run, tol):
    g = [ps_from_below(dw.functional, dw_run, dw_atlas, tol, k).grad_norm for k in (4, 16, 64)]
    assert g[0] > g[1] > g[2]


def test_ps_from_below_deep_level(dw, dw_atlas, dw_run, tol):
    # c - 1/k below the minimum of the well is unreachable
    with pytest.raises(LevelNotReached):
        ps_from_below(dw.functional, dw_run, dw_atlas, tol, 1, base=0.5)
    y = ps_from_below(dw.functional, dw_run, dw_atlas, tol, 3, base=0.5)
    assert y.f_val == pytest.approx(0.5 - 1 / 3, abs=1e-6)
