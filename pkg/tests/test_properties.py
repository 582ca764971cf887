import math

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from optdiv.analytics import (Diffusion, absorbed_density, hitting_time_cdf, reflected_density,
                              running_max_cdf, survival_above_level)
from optdiv.boundary import perpetual_boundary, perpetual_value
from optdiv.cli import FIELDS, parse_config_text
from optdiv.problem import CaseStudyParams
from optdiv.simulate import ConstantBarrier, PathConfig, estimate_J
from optdiv.verify import judge

mus = st.floats(-0.3, 0.3)
sigmas = st.floats(0.05, 1.0)
pos = st.floats(1e-3, 3.0)
times = st.floats(1e-3, 10.0)


@given(mus, sigmas, pos, st.floats(0.0, 3.0), times)
def test_reflected_density_nonnegative(mu, sig, x, y, tau):
    assert reflected_density(Diffusion(mu, sig), x, y, tau) >= -1e-12


@given(mus, sigmas, pos, pos, times)
def test_absorbed_below_free_density(mu, sig, x, y, tau):
    d = Diffusion(mu, sig)
    v = sig * sig * tau
    free = math.exp(-(y - x - mu * tau) ** 2 / (2 * v)) / math.sqrt(2 * math.pi * v)
    a = absorbed_density(d, x, y, tau)
    assert -1e-15 <= a <= free * (1 + 1e-9) + 1e-300


@given(mus, sigmas, st.floats(0.0, 5.0), st.floats(0.0, 5.0), times)
def test_running_max_cdf_monotone(mu, sig, z1, z2, s):
    d = Diffusion(mu, sig)
    lo, hi = sorted((z1, z2))
    a, b = running_max_cdf(d, lo, s), running_max_cdf(d, hi, s)
    assert 0.0 <= a <= b + 1e-12 <= 1.0 + 1e-12


@given(mus, sigmas, pos, pos, pos, times)
def test_survival_decreasing_in_level(mu, sig, x, b1, b2, th):
    d = Diffusion(mu, sig)
    lo, hi = sorted((b1, b2))
    s_lo, s_hi = survival_above_level(d, x, lo, th), survival_above_level(d, x, hi, th)
    assert 0.0 <= s_hi <= s_lo + 1e-12 <= 1.0 + 1e-12
    assert s_lo <= 1.0 - hitting_time_cdf(d, x, th) + 1e-12


@given(mus, sigmas, pos, times, times)
def test_hitting_cdf_increasing(mu, sig, x, t1, t2):
    d = Diffusion(mu, sig)
    lo, hi = sorted((t1, t2))
    assert hitting_time_cdf(d, x, lo) <= hitting_time_cdf(d, x, hi) + 1e-12


@given(st.floats(0.5, 2.0), st.floats(1.01, 3.0), st.floats(0.01, 0.2), mus, sigmas)
def test_perpetual_value_bounds(eta, ratio, r, mu, sig):
    c = CaseStudyParams(eta, eta * ratio, r)
    d = Diffusion(mu, sig)
    b = perpetual_boundary(c, d, b_max=1e3)
    assert b > 0.0
    v = perpetual_value(c, d, np.linspace(0.0, b, 20), b)
    assert np.all(v >= eta * (1 - 1e-9)) and np.all(v <= c.kappa * (1 + 1e-9))


@given(st.floats(1.01, 2.0), st.floats(0.01, 1.0))
def test_perpetual_boundary_increasing_in_kappa(k1, dk):
    d = Diffusion(0.03, 0.25)
    lo = perpetual_boundary(CaseStudyParams(1.0, k1, 0.05), d)
    hi = perpetual_boundary(CaseStudyParams(1.0, k1 + dk, 0.05), d)
    assert hi > lo


@settings(deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=8))
def test_boundary_interpolant_nonincreasing(boundary, ts):
    ts = np.sort(np.array(ts))
    assert np.all(np.diff(boundary(ts)) <= 1e-12)


_values = {
    "mu": st.floats(-1, 1, allow_nan=False).map(repr),
    "seed": st.integers(0, 2**40).map(str),
    "variant": st.sampled_from(["consistent", "paper_exact"]),
    "n_t": st.integers(2, 500).map(str),
}


@given(st.dictionaries(st.sampled_from(sorted(_values)), st.just(None), min_size=1), st.data())
def test_config_round_trip(keys, data):
    pairs = {k: data.draw(_values[k]) for k in keys}
    text = "\n".join(f"{k} = {v}" for k, v in pairs.items())
    parsed = parse_config_text(text)
    assert parsed == {k: FIELDS[k][0](v) for k, v in pairs.items()}


@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.floats(0.05, 1.0), st.floats(0.0, 1.5), st.integers(0, 2**32))
def test_estimate_decomposition_exact(problem, level, x, seed):
    e = estimate_J(problem, ConstantBarrier(level), 0.0, x, PathConfig(dt=0.05, n_paths=64, seed=seed))
    assert e.j_mean == math.fsum(e.components)
    assert e.mean_D >= 0.0 and e.mean_I >= 0.0


@given(st.floats(allow_nan=True), st.floats(0.0, 1e6), st.one_of(st.none(), st.floats(1.0, 100.0)))
def test_judge_is_deterministic(measured, tol, warn):
    a = judge("c", measured, tol, "p", warn)
    b = judge("c", measured, tol, "p", warn)
    assert a.status == b.status
    if not measured <= tol:
        assert a.status != "pass"
