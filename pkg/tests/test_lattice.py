import numpy as np
import pytest

from optdiv.lattice import lattice_boundary
from optdiv.problem import default_problem

from oracles import LATTICE_B0, PERPETUAL_LATTICE_B0


def test_lattice_matches_independent_lattice():
    res = lattice_boundary(default_problem(), 8000)
    assert abs(res.b0 - LATTICE_B0) <= 2 * res.dx


def test_lattice_long_horizon():
    res = lattice_boundary(default_problem(T=20.0), 20000)
    assert res.b0 == pytest.approx(PERPETUAL_LATTICE_B0, abs=2 * res.dx)


def test_lattice_values_within_bounds():
    p = default_problem()
    res = lattice_boundary(p, 2000)
    assert res.u0[0] == pytest.approx(1.5)
    assert np.all(res.u0 >= 1.0 - 1e-12) and np.all(res.u0 <= 1.5 + 1e-12)
    b = res.boundary[:-1]
    assert np.all(np.diff(b[np.isfinite(b)]) <= 1e-12)


def test_lattice_rejects_coarse_steps():
    with pytest.raises(ValueError):
        lattice_boundary(default_problem(), 1)
