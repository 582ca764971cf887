import json
import math

import pytest

from optdiv.problem import default_problem
from optdiv.verify import CheckResult, SuiteOptions, judge, run_suite, run_suite_params


def test_judge_statuses():
    assert judge("a", 0.5, 1.0, "p").status == "pass"
    assert judge("a", 5.0, 1.0, "p", warn_factor=10.0).status == "warn"
    assert judge("a", 50.0, 1.0, "p", warn_factor=10.0).status == "fail"
    assert judge("a", math.nan, 1.0, "p", warn_factor=10.0).status == "fail"


def test_check_result_status_validated():
    with pytest.raises(ValueError):
        CheckResult("a", "maybe", 0.0, 0.0, "p")


def test_options_validation():
    with pytest.raises(ValueError):
        SuiteOptions(variant="other")
    with pytest.raises(ValueError):
        SuiteOptions(oracle_points=9)


def test_equal_costs_short_circuit():
    rep = run_suite_params(0.03, 0.25, 1.0, 1.0, 1.0, 0.05, SuiteOptions.quick_profile())
    assert not rep.ok
    assert [c.name for c in rep.checks] == ["validation.parameters"]
    assert json.loads(rep.to_json())["status"] == "fail"


@pytest.fixture(scope="module")
def quick_report():
    return run_suite(default_problem(), SuiteOptions.quick_profile())


def test_quick_suite_passes(quick_report):
    assert quick_report.ok, quick_report.summary()
    names = [c.name for c in quick_report.checks]
    order = [n.split(".")[0] for n in names]
    stages = ["validation", "oracle", "boundary", "value", "sim", "route"]
    assert [s for i, s in enumerate(order) if i == 0 or order[i - 1] != s] == stages


def test_report_is_stable(quick_report):
    again = run_suite(default_problem(), SuiteOptions.quick_profile())
    assert again.to_json() == quick_report.to_json()
    doc = json.loads(quick_report.to_json())
    assert list(doc) == sorted(doc)
    assert doc["counts"]["fail"] == 0


def test_perturbed_boundary_detected():
    rep = run_suite(default_problem(), SuiteOptions.quick_profile(boundary_scale=1.1))
    failed = {c.name for c in rep.checks if c.status == "fail"}
    assert "boundary.residual" in failed
    assert any(n.startswith("sim.") for n in failed)
    assert not rep.ok


def test_paper_exact_variant_fails_oracles():
    rep = run_suite(default_problem(), SuiteOptions.quick_profile(variant="paper_exact"))
    failed = {c.name for c in rep.checks if c.status == "fail"}
    assert any(n.startswith("oracle.reflected_density") for n in failed)
    assert any(n.startswith("oracle.running_max_cdf") for n in failed)
