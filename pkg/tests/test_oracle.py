import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from mdivif.analysis import influence_curve
from mdivif.constraints import linear_constraint
from mdivif.divergences import disparity_kernel, dpd_kernel, kl_kernel, power_divergence_generator, sdiv_kernel
from mdivif.errors import ConvergenceError, KernelInapplicableError
from mdivif.estimator import FitSettings
from mdivif.models import TrueDistribution, make_model
from mdivif.oracle import OracleReport, compare, compare_mc, if_finite_difference, mc_variance


def _normal(theta=(0.0, 1.0)):
    m = make_model("normal")
    return m, TrueDistribution.from_model(m, list(theta))


def test_symmetric_point_gives_zero_location_influence():
    m, g = _normal((0.7, 1.0))
    fd = if_finite_difference(m, dpd_kernel(1.0), g, None, 0.7)
    assert abs(fd.value[0]) < 1e-5


def test_dpd_closed_form_at_two():
    m, g = _normal()
    fd = if_finite_difference(m, dpd_kernel(0.5), g, None, 2.0)
    assert_allclose(fd.value[0], 1.5 ** 1.5 * 2 * np.exp(-1), rtol=1e-3)


def test_restricted_quotient_is_tangent():
    m = make_model("mvnormal_isotropic", dim=2)
    g = TrueDistribution.from_model(m, [0.0, 0.0, 1.0])
    Hm = np.array([[1.0], [-1.0], [0.0]])
    fd = if_finite_difference(m, kl_kernel(), g, linear_constraint(Hm), [3.0, 0.0])
    assert np.linalg.norm(Hm.T @ fd.value) < 1e-5
    assert_allclose(fd.value[:2], [1.5, 1.5], rtol=1e-6)


def test_richardson_improves_on_the_raw_quotient():
    cells = []
    m, g = _normal()
    for y in (-3.0, -1.0, 0.5, 2.0, 4.0):
        for kern in (dpd_kernel(0.25), dpd_kernel(1.0)):
            cells.append((m, g, kern, y))
    mp = make_model("poisson")
    gp = TrueDistribution.from_model(mp, [3.0])
    for y in (0.0, 2.0, 5.0):
        cells.append((mp, gp, sdiv_kernel(0.5, 0.5), y))
    better = 0
    for model, g, kern, y in cells:
        theta = g.model_element()[1]
        run = influence_curve(model, kern, g, None, np.array([y]), theta=theta)
        fd = if_finite_difference(model, kern, g, None, y, base=theta)
        exact = run.result.values[0]
        better += np.linalg.norm(fd.value - exact) < np.linalg.norm(fd.quotients[-1] - exact)
    assert better >= 0.9 * len(cells)


def test_ladder_must_halve():
    m, g = _normal()
    with pytest.raises(ValueError):
        if_finite_difference(m, kl_kernel(), g, None, 1.0, ladder=(1e-3, 1e-4, 1e-5))


def test_report_fields_are_consistent():
    rep = compare("x", [1.0, 2.0], [1.0, 2.001], 1e-3)
    assert_allclose(rep.abs_discrepancy, 1e-3, rtol=1e-9)
    assert_allclose(rep.rel_discrepancy, 1e-3 / np.linalg.norm([1.0, 2.001]), rtol=1e-9)
    assert rep.passed == (rep.rel_discrepancy <= rep.tolerance)
    back = json.loads(rep.to_json())
    assert back["check"] == "x" and back["passed"] is True
    failed = OracleReport.failed("y", KernelInapplicableError("no"))
    assert not failed.passed and failed.error_code == "kernel-inapplicable"


def test_mc_is_seed_deterministic_and_thread_independent():
    m = make_model("poisson")
    a = mc_variance(m, [2.0], kl_kernel(), n=50, reps=40, seed=3)
    b = mc_variance(m, [2.0], kl_kernel(), n=50, reps=40, seed=3, threads=4)
    assert_allclose(a.cov, b.cov, rtol=0, atol=0)
    assert a.failures == 0 and a.reps == 40


def test_jackknife_se_scales_like_inverse_root_reps():
    m = make_model("poisson")
    a = mc_variance(m, [2.0], kl_kernel(), n=60, reps=400, seed=1)
    b = mc_variance(m, [2.0], kl_kernel(), n=60, reps=800, seed=2)
    assert_allclose(b.se[0, 0] / a.se[0, 0], 1 / np.sqrt(2), rtol=0.2)


def test_mc_matches_inverse_information_for_poisson_mle():
    m = make_model("poisson")
    mc = mc_variance(m, [2.0], kl_kernel(), n=100, reps=600, seed=0)
    assert compare_mc("poisson", [[2.0]], mc).passed


def test_mc_aborts_on_widespread_failure():
    m = make_model("poisson")
    with pytest.raises(ConvergenceError):
        mc_variance(m, [2.0], kl_kernel(), n=20, reps=10, settings=FitSettings(max_iter=0))


def test_mc_refuses_smoothing_free_disparity_on_continuous_model():
    m, _ = _normal()
    with pytest.raises(KernelInapplicableError):
        mc_variance(m, [0.0, 1.0], disparity_kernel(power_divergence_generator(-0.5)), reps=5)
