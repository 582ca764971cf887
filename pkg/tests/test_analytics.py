import math

import numpy as np
import pytest
from scipy import integrate

from optdiv.analytics import (Diffusion, DomainError, absorbed_density, hitting_time_cdf,
                              hitting_time_density, reflected_density, running_max_cdf,
                              std_normal_cdf, survival_above_level)
from optdiv.simulate import hitting_time_mc, killed_endpoints, reflected_endpoints

D = Diffusion(0.03, 0.25)


def test_std_normal_cdf_reference_values():
    assert std_normal_cdf(0.0) == 0.5
    assert std_normal_cdf(1.959963984540054) == pytest.approx(0.975, abs=1e-15)
    assert std_normal_cdf(-40.0) == 0.0
    np.testing.assert_allclose(std_normal_cdf([-1.0, 1.0]).sum(), 1.0, rtol=1e-15)


def test_std_normal_cdf_rejects_nan():
    with pytest.raises(DomainError):
        std_normal_cdf(float("nan"))


def test_diffusion_validation():
    with pytest.raises(ValueError):
        Diffusion(0.0, 0.0)
    with pytest.raises(ValueError):
        Diffusion(float("inf"), 0.2)


def test_survival_limits():
    assert survival_above_level(D, 50.0, 1e-3, 1.0) == pytest.approx(1.0, abs=1e-12)
    assert survival_above_level(D, 1e-9, 0.1, 1.0) < 1e-6


def test_survival_equals_absorbed_mass_above_level():
    x, beta, th = 0.4, 0.3, 0.7
    mass, _ = integrate.quad(lambda y: absorbed_density(D, x, y, th), beta, np.inf)
    assert survival_above_level(D, x, beta, th) == pytest.approx(mass, abs=1e-9)


def test_hitting_density_integrates_to_cdf():
    for x, t in [(0.1, 0.5), (0.5, 1.0), (1.0, 5.0)]:
        val, _ = integrate.quad(lambda s: hitting_time_density(D, x, s), 0.0, t, limit=200)
        assert val == pytest.approx(hitting_time_cdf(D, x, t), abs=1e-9)


def test_hitting_ever_probability_positive_drift():
    # P(S < inf) = exp(-2 mu x / sigma^2) for mu > 0
    d = Diffusion(0.2, 0.3)
    x = 0.25
    val, _ = integrate.quad(lambda s: hitting_time_density(d, x, s), 0.0, np.inf, limit=400)
    assert val == pytest.approx(math.exp(-2 * 0.2 * x / 0.09), abs=1e-8)


def test_absorbed_mass_is_survival():
    x, tau = 0.3, 0.8
    mass, _ = integrate.quad(lambda y: absorbed_density(D, x, y, tau), 0.0, np.inf)
    assert mass == pytest.approx(1.0 - hitting_time_cdf(D, x, tau), abs=1e-9)


def test_reflected_consistent_is_a_density():
    for x, tau in [(0.0, 0.2), (0.3, 1.0), (1.0, 3.0)]:
        mass, _ = integrate.quad(lambda y: reflected_density(D, x, y, tau), 0.0, np.inf)
        assert mass == pytest.approx(1.0, abs=1e-9)
        assert np.all(reflected_density(D, x, np.linspace(0, 3, 50), tau) >= 0.0)


def test_reflected_paper_exact_is_not_a_density():
    d = Diffusion(0.1, 0.3)
    mass, _ = integrate.quad(lambda y: reflected_density(d, 0.5, y, 1.0, "paper_exact"), 0.0, 5.0)
    assert abs(mass - 1.0) > 0.05


def test_reflected_forward_equation():
    # d/dtau rho = sigma^2/2 rho_yy - mu rho_y in the interior
    x, tau, y, h, k = 0.4, 0.6, 0.5, 1e-3, 1e-4
    rho = lambda yy, tt: reflected_density(D, x, yy, tt)
    dt = (rho(y, tau + k) - rho(y, tau - k)) / (2 * k)
    dy = (rho(y + h, tau) - rho(y - h, tau)) / (2 * h)
    dyy = (rho(y + h, tau) - 2 * rho(y, tau) + rho(y - h, tau)) / h**2
    assert dt == pytest.approx(0.5 * 0.0625 * dyy - 0.03 * dy, abs=1e-5)


def test_running_max_long_run_exponential():
    # xi_s = sup(-nu theta - W) converges to Exp(2 nu) for nu > 0
    d = Diffusion(0.2, 0.5)
    nu = 0.4
    z = np.array([0.1, 0.5, 1.5])
    np.testing.assert_allclose(running_max_cdf(d, z, 4000.0), 1.0 - np.exp(-2 * nu * z), atol=1e-12)
    assert not np.allclose(running_max_cdf(d, z, 4000.0, "paper_exact"), 1.0 - np.exp(-2 * nu * z),
                           atol=1e-3)


def test_running_max_is_a_cdf():
    z = np.linspace(0.0, 20.0, 400)
    F = running_max_cdf(D, z, 2.0)
    assert F[0] == pytest.approx(0.0, abs=1e-15)
    assert np.all(np.diff(F) >= 0.0)
    assert F[-1] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("fn, args", [
    (survival_above_level, (D, -1.0, 0.5, 1.0)),
    (survival_above_level, (D, 1.0, 0.0, 1.0)),
    (hitting_time_density, (D, 0.0, 1.0)),
    (hitting_time_density, (D, 1.0, -1.0)),
    (absorbed_density, (D, 1.0, -0.1, 1.0)),
    (reflected_density, (D, -1.0, 0.1, 1.0)),
    (running_max_cdf, (D, -0.5, 1.0)),
])
def test_domain_errors(fn, args):
    with pytest.raises(DomainError):
        fn(*args)


def test_unknown_variant_rejected():
    with pytest.raises(DomainError):
        reflected_density(D, 0.5, 0.5, 1.0, "other")


def test_hitting_time_mc_example():
    d = Diffusion(0.1, 0.3)
    est = hitting_time_mc(d, 1.0, 5.0, n_paths=200_000, n_steps=64, seed=11)
    exact = 1.0 - hitting_time_cdf(d, 1.0, 5.0)
    assert abs(est.p - exact) <= 3 * est.stderr


def test_hitting_time_mc_trivial_limits():
    assert hitting_time_mc(D, 20.0, 1.0, n_paths=2000, seed=1).p == 1.0
    assert hitting_time_mc(D, 1e-6, 1.0, n_paths=2000, seed=1).p < 0.01


def test_absorbed_density_against_mc_band():
    x, tau = 0.3, 0.5
    ends, alive = killed_endpoints(D, x, tau, 200_000, 32, seed=5)
    lo, hi = 0.2, 0.4
    ph = np.mean(alive & (ends >= lo) & (ends <= hi))
    se = math.sqrt(ph * (1 - ph) / ends.size)
    exact, _ = integrate.quad(lambda y: absorbed_density(D, x, y, tau), lo, hi)
    assert abs(ph - exact) <= 3 * se


def test_reflected_variants_against_mc_band():
    d = Diffusion(0.1, 0.3)
    x, tau, lo, hi = 0.3, 1.0, 0.2, 0.5
    R, _ = reflected_endpoints(d, x, tau, 200_000, 32, seed=9)
    ph = np.mean((R >= lo) & (R <= hi))
    se = math.sqrt(ph * (1 - ph) / R.size)
    good, _ = integrate.quad(lambda y: reflected_density(d, x, y, tau), lo, hi)
    bad, _ = integrate.quad(lambda y: reflected_density(d, x, y, tau, "paper_exact"), lo, hi)
    assert abs(ph - good) <= 3 * se
    assert abs(ph - bad) > 10 * se


def test_running_max_against_mc():
    d = Diffusion(0.1, 0.3)
    x, tau, c = 0.2, 1.0, 0.05
    _, inj = reflected_endpoints(d, x, tau, 200_000, 32, seed=21)
    ph = np.mean(inj <= c)
    se = math.sqrt(ph * (1 - ph) / inj.size)
    exact = running_max_cdf(d, (x + c) / 0.3, tau)
    assert abs(ph - exact) <= 3 * se
