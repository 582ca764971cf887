import numpy as np
import pytest

from optdiv.analytics import Diffusion
from optdiv.boundary import (Boundary, TimeGrid, perpetual_boundary, perpetual_value, residual,
                             residuals, solve_boundary)
from optdiv.problem import CaseStudyParams, default_problem

from oracles import LATTICE_B0, LATTICE_DX, PERPETUAL_B


def test_geometric_grid_shape():
    g = TimeGrid.geometric(1.0, 256)
    assert g.n == 256 and g.times[0] == 0.0 and g.times[-1] == 1.0
    assert g.times[-1] - g.times[-2] == pytest.approx(256.0 ** -2.5, rel=1e-9)
    assert np.all(np.diff(g.times) > 0)


def test_time_grid_rejects_bad_knots():
    with pytest.raises(ValueError):
        TimeGrid(np.array([0.0, 0.5, 0.5, 1.0]))
    with pytest.raises(ValueError):
        TimeGrid.geometric(1.0, 1)


def test_solver_needs_enough_knots(problem):
    with pytest.raises(ValueError):
        solve_boundary(problem, TimeGrid.uniform(1.0, 8))


def test_boundary_shape(boundary, problem):
    b = boundary.values
    assert b[-1] == 0.0
    assert np.all(b[:-1] > 0.0)
    assert np.all(np.diff(b) <= 1e-8 * PERPETUAL_B)
    assert b.max() <= PERPETUAL_B + 1e-6
    assert b[-2] <= 0.05 * PERPETUAL_B
    assert not boundary.flagged


def test_boundary_against_lattice_oracle(boundary):
    assert abs(boundary.values[0] - LATTICE_B0) <= 2 * LATTICE_DX


def test_knot_residuals_small(problem, boundary):
    r = residuals(problem, boundary)
    assert np.max(np.abs(r)) < 1e-10


def test_between_knot_residuals(problem, boundary):
    tk = boundary.times
    rt = np.sqrt(1.0 - tk)
    mids = 1.0 - (0.5 * (rt[:-1] + rt[1:])) ** 2
    worst = max(abs(residual(problem, boundary, float(t))) for t in mids[::8])
    assert worst <= 1e-5


def test_residual_detects_perturbation(problem, boundary):
    bad = Boundary(boundary.grid, 1.1 * boundary.values, meta=dict(boundary.meta))
    assert abs(residual(problem, bad, 0.5)) > 1e-4


def test_last_knot_decreases_under_refinement(problem, boundary, boundary64):
    assert boundary.values[-2] < boundary64.values[-2]
    assert boundary.values[0] == pytest.approx(boundary64.values[0], abs=1e-3)


def test_interpolation_matches_knots(boundary):
    np.testing.assert_array_equal(boundary(boundary.times), boundary.values)
    t = 0.5 * (boundary.times[10] + boundary.times[11])
    lo, hi = sorted((boundary.values[10], boundary.values[11]))
    assert lo <= boundary(t) <= hi


def test_csv_round_trip(boundary):
    text = boundary.to_csv({"k": "v"})
    assert text.startswith("# k=v\nt,b\n")
    back = Boundary.from_csv(text)
    np.testing.assert_array_equal(back.values, boundary.values)
    assert back.fingerprint() == boundary.fingerprint()


def test_perpetual_boundary_oracle():
    b = perpetual_boundary(CaseStudyParams(), Diffusion(0.03, 0.25))
    assert b == pytest.approx(PERPETUAL_B, abs=1e-12)


def test_perpetual_boundary_shrinks_as_kappa_approaches_eta():
    d = Diffusion(0.03, 0.25)
    vals = [perpetual_boundary(CaseStudyParams(1.0, k, 0.05), d) for k in (1.5, 1.1, 1.01, 1.001)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 0.05


def test_perpetual_value_conditions():
    c, d = CaseStudyParams(), Diffusion(0.03, 0.25)
    b = perpetual_boundary(c, d)
    assert perpetual_value(c, d, 0.0) == pytest.approx(1.5, abs=1e-12)
    assert perpetual_value(c, d, b) == pytest.approx(1.0, abs=1e-12)
    h = 1e-6
    assert (perpetual_value(c, d, b) - perpetual_value(c, d, b - h)) / h == pytest.approx(0.0, abs=1e-5)
    v = perpetual_value(c, d, np.linspace(0.0, b, 50))
    assert np.all((v >= 1.0 - 1e-12) & (v <= 1.5 + 1e-12))


def test_perpetual_needs_positive_rate():
    with pytest.raises(ValueError):
        perpetual_boundary(CaseStudyParams(1.0, 1.5, 0.0), Diffusion(0.03, 0.25))


def test_long_horizon_approaches_perpetual():
    p = default_problem(T=20.0)
    b = solve_boundary(p, TimeGrid.geometric(20.0, 64))
    assert abs(b.values[0] / PERPETUAL_B - 1.0) < 0.01
