import math

import numpy as np
import pytest

from optdiv.analytics import Diffusion
from optdiv.problem import (CaseStudyParams, ProblemData, ValidationError, default_problem,
                            make_case_study, require_valid, validate)


def test_zero_rate_case_is_constant():
    p = make_case_study(CaseStudyParams(1.0, 1.5, 0.0), Diffusion(0.03, 0.25), 1.0)
    t = np.linspace(0.0, 1.0, 5)
    np.testing.assert_array_equal(p.f(t), 1.0)
    np.testing.assert_array_equal(p.m(t), 1.5)
    np.testing.assert_array_equal(p.g(0.3, t), t)


def test_exponential_evaluation():
    p = make_case_study(CaseStudyParams(1.0, 1.2, 0.05), Diffusion(0.03, 0.25), 1.0)
    assert p.f(1.0) == pytest.approx(0.951229424500714, rel=1e-15)
    assert p.f_prime(0.5) == pytest.approx(-0.05 * math.exp(-0.025), rel=1e-15)
    assert p.m_prime(0.5) == pytest.approx(-0.06 * math.exp(-0.025), rel=1e-15)
    assert p.g_x(1.0, 2.0) == pytest.approx(p.f(1.0), rel=0)


@pytest.mark.parametrize("kappa", [0.9, 1.0])
def test_kappa_not_above_eta_rejected(kappa):
    with pytest.raises(ValidationError):
        CaseStudyParams(1.0, kappa, 0.05)


@pytest.mark.parametrize("field", ["eta", "kappa", "r"])
def test_negative_or_nonfinite_rejected(field):
    base = dict(eta=1.0, kappa=1.5, r=0.05)
    for bad in (-0.1, float("nan"), float("inf")):
        with pytest.raises(ValidationError):
            CaseStudyParams(**{**base, field: bad})


def test_horizon_must_be_positive():
    with pytest.raises(ValidationError):
        make_case_study(CaseStudyParams(), Diffusion(0.03, 0.25), 0.0)


def test_case_study_validates():
    rep = validate(default_problem())
    assert rep.ok and rep.failed() == []


def test_custom_problem_violation_reported():
    p0 = default_problem()
    p = ProblemData(p0.diff, 1.0, p0.f, p0.f_prime, p0.f, p0.g, p0.g_x)
    rep = validate(p)
    assert not rep.ok
    assert rep.failed() == ["injection_cost_exceeds_dividend"]
    with pytest.raises(ValidationError):
        require_valid(p)


def test_numerical_m_derivative():
    p0 = default_problem()
    p = ProblemData(p0.diff, 1.0, p0.f, p0.f_prime, p0.m, p0.g, p0.g_x)
    assert p.dm(0.4) == pytest.approx(float(p0.m_prime(0.4)), rel=1e-8)


def test_fingerprint_depends_on_parameters():
    a = default_problem().fingerprint()
    assert a == default_problem().fingerprint()
    assert a != default_problem(T=2.0).fingerprint()
    b = make_case_study(CaseStudyParams(1.0, 1.6, 0.05), Diffusion(0.03, 0.25), 1.0)
    assert a != b.fingerprint()
