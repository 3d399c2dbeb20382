import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import simple_problem
from switchvi.bilateral import compare_sub_super
from switchvi.grid import GridSpec, build_grid, interpolate
from switchvi.schemes import (Closure, PenalizedConfig, SolverError, default_schedule, run_schedule,
                              run_until_stagnation, solve_penalized, step_backward)


def grid_for(problem, nodes=11, steps=10, lo=-1.0, hi=1.0):
    return build_grid(GridSpec([lo], [hi], [nodes], steps), problem)


def test_config_validation():
    with pytest.raises(ValueError):
        PenalizedConfig("sideways")
    with pytest.raises(ValueError):
        PenalizedConfig(n=-1)
    with pytest.raises(ValueError):
        PenalizedConfig(theta=1.5)
    with pytest.raises(ValueError):
        PenalizedConfig(damping=0)
    assert PenalizedConfig("lower_only", m=4).closure == Closure("hard", "penalty", 0.0, 4.0)


def test_step_constant_generator():
    p = simple_problem(2, 1, f="0.7")
    g = grid_for(p, steps=4)
    nxt = np.random.default_rng(0).normal(size=(2, 1, g.size))
    got = step_backward(nxt, 2, PenalizedConfig(theta=0.5), p, g)
    np.testing.assert_allclose(got, nxt + 0.7 * g.dt, atol=1e-12)


def test_step_identity():
    p = simple_problem(2, 2)
    g = grid_for(p)
    nxt = np.random.default_rng(1).normal(size=(2, 2, g.size))
    np.testing.assert_allclose(step_backward(nxt, 0, PenalizedConfig(), p, g), nxt, atol=1e-12)


def test_step_penalized_example():
    h = {(1, 1): "0", (2, 1): "1", (1, 2): "0", (2, 2): "0"}
    p = simple_problem(2, 2, h=h, g_lower=lambda a, c: "0.2", g_upper=lambda a, c: "0.5", T=0.1)
    g = grid_for(p, nodes=3, steps=1)
    got = step_backward(p.terminal(g.points), 0, PenalizedConfig("doubly", n=10, m=0), p, g)
    np.testing.assert_allclose(got[0, 0], 0.4, atol=1e-12)
    np.testing.assert_allclose(got[1, 0], 1.0, atol=1e-12)


def test_zero_steps_gives_terminal():
    p = simple_problem(2, 2, h="x1^2", g_lower=lambda a, c: "1", g_upper=lambda a, c: "2")
    g = grid_for(p, steps=0)
    field, report = solve_penalized(p, g, PenalizedConfig(n=4, m=4))
    assert field.data.shape[2] == 1
    np.testing.assert_array_equal(field.data[:, :, 0], p.terminal(g.points))
    assert report.iterations == []


def test_constant_generator_quadrature():
    p = simple_problem(2, 2, f="1", h="pos(x1)", g_lower=lambda a, c: "1", g_upper=lambda a, c: "2")
    g = grid_for(p, steps=7)
    field, report = solve_penalized(p, g, PenalizedConfig())
    np.testing.assert_allclose(field.initial, p.terminal(g.points) + 1.0, atol=1e-12)
    np.testing.assert_array_equal(field.data[:, :, -1], p.terminal(g.points))
    assert report.max_residual <= 1e-10


def test_d1_doubly_close_to_bilateral(d1, d1_grid, d1_min):
    field, _ = solve_penalized(d1, d1_grid, PenalizedConfig("doubly", n=64, m=64))
    assert np.max(np.abs(field.data - d1_min[0].data)) <= 5e-2


def test_schedule_examples(d1, d1_grid):
    tol = 1e-10
    res = run_schedule(d1, d1_grid, PenalizedConfig(fixed_point_tol=tol), [(0, 0), (1, 0), (2, 0)])
    assert [c.direction for c in res.comparisons] == ["increasing", "increasing"]
    assert res.max_violation <= 10 * tol
    res = run_schedule(d1, d1_grid, PenalizedConfig(fixed_point_tol=tol), [(0, 0), (0, 1)])
    assert [c.direction for c in res.comparisons] == ["decreasing"]
    assert compare_sub_super(res.fields[(0.0, 1.0)], res.fields[(0.0, 0.0)]) <= 10 * tol
    single = run_schedule(d1, d1_grid, PenalizedConfig(), [(3, 3)])
    assert len(single.fields) == 1 and single.comparisons == []


def test_schedule_threads_match_serial(d1, d1_grid):
    sched = [(1, 1), (2, 1), (2, 2)]
    a = run_schedule(d1, d1_grid, PenalizedConfig(), sched)
    b = run_schedule(d1, d1_grid, PenalizedConfig(), sched, workers=3)
    for key in a.fields:
        np.testing.assert_array_equal(a.fields[key].data, b.fields[key].data)


def test_default_schedule():
    assert default_schedule(3, "lower_only") == [(0.0, 1.0), (0.0, 2.0), (0.0, 4.0)]
    assert default_schedule(2, "upper_only") == [(1.0, 0.0), (2.0, 0.0)]
    assert default_schedule(2) == [(1.0, 1.0), (2.0, 2.0)]


def test_one_sided_families_bracket(d1, d1_grid):
    lo, _ = solve_penalized(d1, d1_grid, PenalizedConfig("upper_only", n=8))
    hi, _ = solve_penalized(d1, d1_grid, PenalizedConfig("lower_only", m=8))
    assert compare_sub_super(lo, hi) <= 1e-9


def test_stagnation_runner(d1, d1_grid):
    res = run_until_stagnation(d1, d1_grid, PenalizedConfig("upper_only"), tol=1e-3, max_levels=20)
    assert res.converged
    assert res.changes[-1] < 1e-3
    assert max(res.comparisons) <= 1e-9          # increasing in n


def test_exp_shift_invariance(d1, d1_grid):
    base, _ = solve_penalized(d1, d1_grid, PenalizedConfig("doubly", n=4, m=4))
    shifted, _ = solve_penalized(d1, d1_grid, PenalizedConfig("doubly", n=4, m=4, exp_shift_lambda=2.0))
    assert np.max(np.abs(base.data - shifted.data)) <= 10 * 1e-10


def test_determinism(d1, d1_grid):
    cfg = PenalizedConfig("lower_only", m=16)
    a, _ = solve_penalized(d1, d1_grid, cfg)
    b, _ = solve_penalized(d1, d1_grid, cfg)
    np.testing.assert_array_equal(a.data, b.data)


def test_gauss_seidel_agrees_with_newton(d1, d1_grid):
    from switchvi.schemes import _backward_solve
    closure = Closure("penalty", "penalty", 8, 8)
    a, _ = _backward_solve(d1, d1_grid, closure, theta=1.0, lam=0.0, tol=1e-11, max_iters=5000)
    b, _ = _backward_solve(d1, d1_grid, closure, theta=1.0, lam=0.0, tol=1e-11, max_iters=5000,
                           method="gauss_seidel")
    assert np.max(np.abs(a.data - b.data)) <= 1e-9


def test_theta_warning():
    p = simple_problem()
    g = grid_for(p)
    with pytest.warns(UserWarning, match="theta"):
        solve_penalized(p, g, PenalizedConfig(n=100, theta=0.5))


def test_nonconvergence_is_reported(d1, d1_grid):
    from switchvi.schemes import _backward_solve
    closure = Closure("hard", "hard", order="min_first")
    with pytest.raises(SolverError) as info:
        _backward_solve(d1, d1_grid, closure, theta=1.0, lam=0.0, tol=1e-14, max_iters=1,
                        method="gauss_seidel")
    assert "defect" in str(info.value) and info.value.where is not None


def test_coupled_generator_converges():
    # f^{11} reads y_2_1; large costs keep the obstacles inactive
    p = simple_problem(2, 1, f={(1, 1): "0.5*y_2_1", (2, 1): "1"}, sigma="0.3",
                       g_lower=lambda a, c: "5")
    g = grid_for(p, steps=20)
    field, rep = solve_penalized(p, g, PenalizedConfig())
    # y_2_1 = 1 - t, so v^{11}(0) = 0.5 * int_0^1 (1 - s) ds = 0.25
    np.testing.assert_allclose(field.data[1, 0, 0], 1.0, atol=1e-10)
    assert abs(field.data[0, 0, 0, 5] - 0.25) < 0.5 * g.dt
    assert rep.max_residual <= 1e-9


def test_gradient_generator():
    # h = x, f = z1 with sigma = 1: z = 1, so v(0, x) = x + T
    p = simple_problem(1, 1, f="z1", h="x1", sigma="1")
    g = grid_for(p, nodes=21, steps=10)
    field, _ = solve_penalized(p, g, PenalizedConfig())
    np.testing.assert_allclose(field.initial[0, 0], g.points[0] + 1.0, atol=1e-10)


def heat_error(nodes, steps):
    p = simple_problem(1, 1, sigma="1", h="x1^2")
    g = build_grid(GridSpec([-3], [3], [nodes], steps), p)
    field, _ = solve_penalized(p, g, PenalizedConfig())
    return interpolate(field, 1, 1, 0.0, [0.0]) - 1.0


def test_heat_order_three_levels():
    e = [heat_error(121, s) for s in (30, 60, 120)]
    order = math.log2(abs(e[0] - e[1]) / abs(e[1] - e[2]))
    assert abs(e[1]) <= 2e-2
    assert order >= 0.9


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 30.0), st.floats(0.0, 30.0), st.floats(0.0, 2.0))
def test_penalized_step_monotone_in_penalties(n, dn, shift):
    h = {(1, 1): "pos(x1)", (1, 2): "0.1", (2, 1): "x1", (2, 2): "0"}
    p = simple_problem(2, 2, h=h, sigma="0.5", g_lower=lambda a, c: "0.3", g_upper=lambda a, c: "0.4")
    g = grid_for(p, steps=3)
    nxt = p.terminal(g.points)
    lo = step_backward(nxt, 2, PenalizedConfig(n=n, m=shift), p, g)
    hi = step_backward(nxt, 2, PenalizedConfig(n=n + dn, m=shift), p, g)
    assert np.all(lo <= hi + 1e-9)
    down = step_backward(nxt, 2, PenalizedConfig(n=shift, m=n + dn), p, g)
    up = step_backward(nxt, 2, PenalizedConfig(n=shift, m=n), p, g)
    assert np.all(down <= up + 1e-9)
