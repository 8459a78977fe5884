import numpy as np
import pytest

from mdivif.models import TrueDistribution, make_model

# (model name, options, theta_0) used across modules
MODEL_CASES = [
    ("normal", {}, np.array([0.5, 2.0])),
    ("mvnormal_isotropic", {"dim": 2}, np.array([0.5, -0.25, 1.5])),
    ("poisson", {}, np.array([3.0])),
    ("exponential", {}, np.array([0.7])),
]


@pytest.fixture(params=MODEL_CASES, ids=[c[0] for c in MODEL_CASES])
def model_case(request):
    name, opts, theta = request.param
    model = make_model(name, **opts)
    return model, theta, TrueDistribution.from_model(model, theta)


ACCEPTANCE_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    prev = ACCEPTANCE_RESULTS.get(crit, (True, ""))
    ok = prev[0] and report.outcome == "passed"
    ACCEPTANCE_RESULTS[crit] = (ok, dict(report.user_properties).get("title", prev[1]))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE_RESULTS):
        ok, title = ACCEPTANCE_RESULTS[crit]
        terminalreporter.write_line(f"criterion {crit:>2}: {'PASS' if ok else 'FAIL'}  {title}")
