import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from mdivif.analysis import influence_curve
from mdivif.constraints import linear_constraint, no_constraint, proportional_mean
from mdivif.divergences import disparity_kernel, dpd_kernel, kl_kernel, power_divergence_generator
from mdivif.errors import KernelInapplicableError, RankDeficiencyError
from mdivif.influence import (
    asymptotic_variance_restricted,
    components,
    default_grid,
    gross_error_sensitivity,
    if_restricted,
    if_unrestricted,
    restricted_components,
    zero_mean,
)
from mdivif.models import TrueDistribution, fisher_info, make_model


def _at_model(name, theta, kernel, **opts):
    m = make_model(name, **opts)
    g = TrueDistribution.from_model(m, theta)
    return m, g, components(m, kernel, g, np.asarray(theta, float))


@pytest.mark.parametrize("name,theta", [("poisson", [2.5]), ("exponential", [0.8]),
                                        ("normal", [1.0, 2.0])])
def test_kl_at_model_is_inverse_information_times_score(name, theta):
    m, g, comp = _at_model(name, theta, kl_kernel())
    y = default_grid(m, np.asarray(theta), n=25)
    res = if_unrestricted(comp, y)
    Iinv = np.linalg.inv(fisher_info(m, theta))
    assert_allclose(res.values, m.score(y, theta) @ Iinv.T, rtol=1e-8, atol=1e-9)
    assert_allclose(res.V, Iinv, rtol=1e-8, atol=1e-10)


def test_dpd_variance_matches_sandwich_closed_form():
    # location DPD with known unit variance:
    # V = (1+a)^3 (1+2a)^(-3/2) for the location functional
    a = 0.5
    m, g, comp = _at_model("normal", [0.0], dpd_kernel(a), sigma2=1.0)
    res = if_unrestricted(comp, np.array([0.0]))
    assert_allclose(res.V[0, 0], (1 + a) ** 3 * (1 + 2 * a) ** -1.5, rtol=1e-8)


def test_gross_error_sensitivity_of_location_dpd():
    a = 0.5
    m, g, comp = _at_model("normal", [0.0], dpd_kernel(a), sigma2=1.0)
    y = np.linspace(-10, 10, 20001)
    gamma, info = gross_error_sensitivity(if_unrestricted(comp, y))
    assert_allclose(gamma, (1 + a) ** 1.5 / np.sqrt(a * np.e), rtol=1e-7)
    assert info["verdict"] == "bounded-on-probe-range"


def test_one_sided_support_growth_is_flagged():
    m, g, comp = _at_model("exponential", [1.0], kl_kernel())
    res = if_unrestricted(comp, default_grid(m, np.array([1.0])))
    assert gross_error_sensitivity(res)[1]["verdict"] == "edge-growing"


def test_zero_mean_under_contaminated_g():
    m = make_model("normal")
    g = TrueDistribution.from_model(m, [0.0, 1.0]).contaminate(3.0, 0.1)
    run = influence_curve(m, dpd_kernel(0.5), g, None, np.array([0.0, 1.0]), init=[0.0, 1.0])
    assert np.linalg.norm(zero_mean(run.comp, run.result, g)) < 1e-8


def test_restricted_solvers_agree_and_variance_by_quadrature():
    m = make_model("mvnormal_isotropic", dim=2)
    g = TrueDistribution.from_model(m, [0.3, 0.3, 1.0])
    con = linear_constraint(np.array([[1.0], [-1.0], [0.0]]))
    comp0 = restricted_components(m, kl_kernel(), g, con, np.array([0.3, 0.3, 1.0]))
    y = default_grid(m, np.array([0.3, 0.3, 1.0]), n=31)
    a = if_restricted(comp0, con, y, method="lstsq")
    b = if_restricted(comp0, con, y, method="normal")
    assert_allclose(a.values, b.values, rtol=1e-10, atol=1e-12)
    assert_allclose(a.V, [[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]], atol=1e-8)
    assert_allclose(asymptotic_variance_restricted(comp0, con), a.V, atol=1e-8)


def test_declared_rank_deficiency_is_refused():
    m = make_model("mvnormal_isotropic", dim=3)
    theta = np.array([1.0, 1.0, 1.0, 1.0])
    g = TrueDistribution.from_model(m, theta)
    con = proportional_mean([1.0, 1.0, 1.0])
    comp0 = restricted_components(m, kl_kernel(), g, con, theta)
    with pytest.raises(RankDeficiencyError):
        if_restricted(comp0, con, default_grid(m, theta, n=5))


def test_empty_grid_is_an_error():
    m, g, comp = _at_model("poisson", [2.0], kl_kernel())
    with pytest.raises(ValueError):
        if_unrestricted(comp, np.array([]))


def test_disparity_with_point_masses_on_continuous_support_is_refused():
    m = make_model("normal")
    g = TrueDistribution.from_model(m, [0.0, 1.0]).contaminate(2.0, 0.05)
    with pytest.raises(KernelInapplicableError):
        components(m, disparity_kernel(power_divergence_generator(-0.5)), g, np.array([0.0, 1.0]))


def test_influence_curve_dispatch():
    m = make_model("mvnormal_isotropic", dim=3)
    theta = np.array([1.0, 1.0, 1.0, 1.0])
    g = TrueDistribution.from_model(m, theta)
    y = default_grid(m, theta, n=7)
    con = proportional_mean([1.0, 1.0, 1.0])
    assert influence_curve(m, kl_kernel(), g, con, y, theta=theta).solver == "tangent"
    assert influence_curve(m, kl_kernel(), g, con, y, theta=theta, solver="block").solver == "block"
    assert influence_curve(m, kl_kernel(), g, no_constraint(4), y).solver == "unrestricted"
    with pytest.raises(ValueError):
        influence_curve(m, kl_kernel(), g, con, y, solver="guess")


@settings(max_examples=15, deadline=None)
@given(shift=st.floats(-3, 3), y=st.floats(-6, 6))
def test_location_equivariance(shift, y):
    k = dpd_kernel(0.5)
    _, _, c0 = _at_model("normal", [0.0], k, sigma2=1.0)
    _, _, c1 = _at_model("normal", [shift], k, sigma2=1.0)
    v0 = if_unrestricted(c0, np.array([y])).values
    v1 = if_unrestricted(c1, np.array([y + shift])).values
    assert_allclose(v1, v0, rtol=1e-8, atol=1e-10)


def test_proportional_mean_block_and_tangent_solvers_differ_on_the_mean():
    # the partitioned solver sets IF(mu) = 0 when mu0 = (1, ..., 1); the
    # contamination refit moves beta, and the tangent-space solve follows it
    from mdivif.oracle import if_finite_difference

    m = make_model("mvnormal_isotropic", dim=3)
    theta = np.array([1.0, 1.0, 1.0, 1.5])
    g = TrueDistribution.from_model(m, theta)
    con = proportional_mean(np.ones(3))
    y = np.array([[3.0, 1.0, 1.0]])
    block = influence_curve(m, kl_kernel(), g, con, y, theta=theta, solver="block").result
    tangent = influence_curve(m, kl_kernel(), g, con, y, theta=theta).result
    fd = if_finite_difference(m, kl_kernel(), g, con, y[0], base=theta)
    assert np.abs(block.values[0, :3]).max() < 1e-12
    assert_allclose(tangent.values[0], fd.value, rtol=1e-6)
    # beta moves by the average of the mean shift: (3 - 1) / 3
    assert_allclose(fd.value[:3], np.full(3, 2.0 / 3.0), rtol=1e-6)
    assert_allclose(block.values[0, 3], fd.value[3], rtol=1e-6)
