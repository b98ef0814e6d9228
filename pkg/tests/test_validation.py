import pytest

from psdOU.errors import ParameterError
from psdOU.validation import SuiteReport, available_suites, get_suite, run_suites

QUICK_SCALE = 0.02
QUICK_SUITES = ["non_subordinator_drift", "qv_identity", "bessel_gig", "cp_factorize", "mom_fit", "extract"]
SLOW_SUITES = ["stationary_mc", "multivariate_subordinator", "driver_from_target", "psd_invariance"]


def test_registry_lists_every_suite():
    names = available_suites()
    for name in QUICK_SUITES + SLOW_SUITES + ["determinism"]:
        assert name in names
    with pytest.raises(ParameterError):
        get_suite("no_such_suite")


def test_suite_report_counts_failures():
    report = SuiteReport("demo")
    assert report.check("ok", True, value=1.0)
    assert not report.check("bad", False)
    data = report.to_dict()
    assert data["passed"] is False
    assert (data["n_checks"], data["n_failed"]) == (2, 1)
    assert data["checks"][0] == {"check": "ok", "passed": True, "value": 1.0}


@pytest.mark.parametrize("name", QUICK_SUITES)
def test_quick_suites_pass(name):
    report = get_suite(name)(0, QUICK_SCALE)
    assert report.passed, report.to_dict()


def test_determinism_suite():
    report = get_suite("determinism")(3, 1.0)
    assert report.passed, report.to_dict()


@pytest.mark.slow
@pytest.mark.parametrize("name", SLOW_SUITES)
def test_heavy_suites_pass_at_reduced_scale(name):
    report = get_suite(name)(0, 0.1)
    assert report.passed, report.to_dict()


def test_run_suites_layout():
    result = run_suites(["qv_identity", "non_subordinator_drift"], seed=5, scale=QUICK_SCALE)
    assert result["seed"] == 5
    assert result["scale"] == QUICK_SCALE
    assert result["passed"] is True
    assert [s["suite"] for s in result["suites"]] == ["qv_identity", "non_subordinator_drift"]
    with pytest.raises(ParameterError):
        run_suites(["qv_identity", "missing"])


def test_suite_aliases_resolve_to_registered_suite():
    assert get_suite("remark410b") is get_suite("non_subordinator_drift")
    assert "remark410b" not in available_suites()
    assert "remark410b" in available_suites(include_aliases=True)
    result = run_suites(["remark410b"], scale=QUICK_SCALE)
    assert result["passed"] is True
    assert result["suites"][0]["suite"] == "non_subordinator_drift"
