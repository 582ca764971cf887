import json
import math

import numpy as np
import pytest

from optdiv.boundary import TimeGrid, solve_boundary
from optdiv.problem import default_problem
from optdiv.simulate import PathConfig
from optdiv.value import (AnchorOptions, BoundaryMismatch, StoppingValue, anchor_mc,
                          anchor_quadrature, build_value_grid, check_structure, eval_u, eval_V,
                          grid_report, neumann, pde_residual, smooth_fit, value_estimate)

QUAD = AnchorOptions(method="quadrature")


@pytest.fixture(scope="module")
def small_grid(problem, boundary):
    return build_value_grid(problem, boundary, 12, 24)


def test_terminal_value(problem, boundary):
    assert eval_u(problem, boundary, 1.0, 0.3) == float(problem.g_x(1.0, 0.3))


def test_u_between_f_and_m(problem, boundary):
    xs = np.linspace(0.01, 0.8, 30)
    for t in (0.0, 0.4, 0.9):
        u = eval_u(problem, boundary, t, xs)
        assert np.all(u >= problem.f(t) - 1e-6)
        assert np.all(u <= problem.m(t) + 1e-12)


def test_u_near_zero_approaches_m(problem, boundary):
    for t in (0.0, 0.5):
        assert eval_u(problem, boundary, t, 1e-7) == pytest.approx(float(problem.m(t)), abs=1e-5)


def test_eval_u_domain(problem, boundary):
    with pytest.raises(ValueError):
        eval_u(problem, boundary, 0.0, 0.0)
    with pytest.raises(ValueError):
        eval_u(problem, boundary, 1.5, 0.2)


def test_boundary_of_other_problem_rejected(boundary):
    with pytest.raises(BoundaryMismatch):
        StoppingValue(default_problem(T=2.0), boundary)


def test_smooth_fit_at_knots(problem, boundary, stopping_value):
    assert smooth_fit(problem, boundary, stopping_value).max() <= 5e-4


def test_neumann_condition(problem, boundary, stopping_value):
    err = neumann(problem, boundary, [0.0, 0.3, 0.7, 0.95], ev=stopping_value)
    assert np.max(np.abs(err)) <= 1e-3 * 1.5


def test_pde_residual_second_order(problem, boundary, stopping_value):
    b0 = boundary.values[0]
    r1 = pde_residual(problem, boundary, 9, 16, 0.5, 0.75 * b0, 0.1 * b0, stopping_value)
    r2 = pde_residual(problem, boundary, 17, 32, 0.5, 0.75 * b0, 0.1 * b0, stopping_value)
    ratio = np.nanmax(np.abs(r2)) / np.nanmax(np.abs(r1))
    assert 0.15 < ratio < 0.35


def test_grid_invariants(problem, small_grid):
    rep = grid_report(problem, small_grid)
    assert rep.lower_margin >= -1e-6
    assert rep.upper_margin >= 0.0
    assert rep.terminal_exact
    assert rep.max_increase_x <= 1e-6
    assert rep.max_increase_t <= 1e-6


def test_grid_structure(problem, boundary, small_grid):
    sr = check_structure(problem, boundary, small_grid)
    assert sr.down_set_violations == 0
    assert sr.max_cells_off <= 2.0


def test_grid_V_increasing_with_slope_u(problem, small_grid):
    V = small_grid.V[:-1]
    assert np.all(np.diff(V, axis=1) > 0.0)
    h = small_grid.levels[1] - small_grid.levels[0]
    mid_u = 0.5 * (small_grid.u[:-1, 1:] + small_grid.u[:-1, :-1])
    np.testing.assert_allclose(np.diff(V, axis=1) / h, mid_u, atol=5e-3)


def test_grid_serialisation_deterministic(problem, boundary, small_grid):
    again = build_value_grid(problem, boundary, 12, 24)
    assert again.to_csv({"a": 1}) == small_grid.to_csv({"a": 1})
    doc = json.loads(small_grid.to_json({"a": 1}, {"col": np.arange(12.0)}))
    assert doc["meta"]["a"] == 1 and len(doc["u"]) == 12 and doc["col"][3] == 3.0
    lines = small_grid.to_csv(per_time={"col": np.arange(12.0)}).splitlines()
    assert [ln for ln in lines if not ln.startswith("#")][0] == "t,x,u,V,col"


def test_V_above_boundary_is_linear(problem, boundary):
    b0 = float(boundary.values[0])
    v1 = eval_V(problem, boundary, 0.0, b0 + 0.1, QUAD)
    v2 = eval_V(problem, boundary, 0.0, b0 + 0.3, QUAD)
    assert (v2 - v1) / 0.2 == pytest.approx(float(problem.f(0.0)), rel=1e-12)


def test_V_slope_is_u(problem, boundary, stopping_value):
    x, h = 0.2, 1e-4
    ev = lambda y: value_estimate(problem, boundary, 0.3, y, QUAD, stopping_value).value
    slope = (ev(x + h) - ev(x - h)) / (2 * h)
    assert slope == pytest.approx(float(stopping_value.row(0.3, [x])[0]), abs=1e-6)


def test_V_terminal(problem, boundary):
    assert eval_V(problem, boundary, 1.0, 0.4, QUAD) == pytest.approx(float(problem.g(1.0, 0.4)))


def test_anchor_routes_agree(problem, boundary):
    t = 0.5
    bt = float(boundary(t))
    cfg = PathConfig(dt=1e-3, n_paths=20_000, seed=3)
    mc = anchor_mc(problem, boundary, t, [bt], cfg)[0]
    q = anchor_quadrature(problem, boundary, t, bt)
    assert abs(mc.value - q) <= 3 * mc.stderr


def test_paper_exact_anchor_disagrees(problem, boundary):
    bt = float(boundary(0.5))
    good = anchor_quadrature(problem, boundary, 0.5, bt)
    bad = anchor_quadrature(problem, boundary, 0.5, bt, "paper_exact")
    assert abs(good - bad) > 0.05


def test_anchor_options_validation():
    with pytest.raises(ValueError):
        AnchorOptions(method="other")
    with pytest.raises(ValueError):
        AnchorOptions(variant="other")


def test_eval_V_default_uses_mc(problem, boundary):
    est = value_estimate(problem, boundary, 0.9, 0.05,
                         AnchorOptions(n_paths=2000, dt_fraction=1e-2))
    assert est.method == "mc" and est.stderr > 0.0
    q = value_estimate(problem, boundary, 0.9, 0.05, QUAD)
    assert abs(est.value - q.value) <= 4 * est.stderr + 1e-3
