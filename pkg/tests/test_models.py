import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from mdivif.errors import InvalidParameterError
from mdivif.models import TrueDistribution, builtin_models, fisher_info, make_model, sample
from mdivif.quadrature import integrate


def _fd(fun, theta, h=1e-6):
    cols = []
    for j in range(len(theta)):
        e = np.zeros(len(theta))
        e[j] = h
        cols.append((fun(theta + e) - fun(theta - e)) / (2 * h))
    return np.stack(cols, axis=-1)


def test_catalog_names():
    assert set(builtin_models()) == {"normal", "mvnormal_isotropic", "poisson", "exponential"}
    with pytest.raises(ValueError):
        make_model("cauchy")


def test_density_integrates_to_one(model_case):
    model, theta, _ = model_case
    res = integrate(lambda x: model.pdf(x, theta), model.support, windows=model.windows(theta))
    assert_allclose(res.value, 1.0, rtol=1e-10)


def test_density_derivatives_match_finite_differences(model_case):
    model, theta, _ = model_case
    x = model.rvs(theta, 7, np.random.default_rng(3))
    grad = model.density_grad(x, theta)
    assert_allclose(grad, _fd(lambda t: model.pdf(x, t), theta), rtol=1e-6, atol=1e-10)
    hess = model.density_hess(x, theta)
    assert_allclose(hess, _fd(lambda t: model.density_grad(x, t), theta), rtol=1e-6, atol=1e-9)


def test_fisher_information_closed_forms():
    assert_allclose(fisher_info(make_model("normal"), [1.0, 2.0]), np.diag([0.5, 1 / 8.0]), rtol=1e-9,
                    atol=1e-14)
    assert_allclose(fisher_info(make_model("poisson"), [4.0]), [[0.25]], rtol=1e-10)
    assert_allclose(fisher_info(make_model("exponential"), [2.0]), [[0.25]], rtol=1e-9)
    mv = make_model("mvnormal_isotropic", dim=3)
    assert_allclose(fisher_info(mv, [0, 1, 2, 0.5]), np.diag([2, 2, 2, 3 / (2 * 0.25)]),
                    rtol=1e-9, atol=1e-12)


def test_known_variance_variant_drops_a_parameter():
    m = make_model("normal", sigma2=4.0)
    assert m.p == 1
    assert_allclose(fisher_info(m, [0.0]), [[0.25]], rtol=1e-9)


def test_invalid_parameters_rejected():
    with pytest.raises(InvalidParameterError):
        make_model("normal").check([0.0, -1.0])
    with pytest.raises(InvalidParameterError):
        make_model("poisson").check([1.0, 2.0])


def test_sampling_is_seed_deterministic():
    m = make_model("exponential")
    assert_allclose(sample(m, [1.0], 50, 9), sample(m, [1.0], 50, 9), rtol=0, atol=0)


def test_contamination_weights():
    m = make_model("normal")
    g = TrueDistribution.from_model(m, [0.0, 1.0]).contaminate(2.0, 0.25)
    assert g.model_element() is None
    assert_allclose(g.continuous_density(np.array([0.0])), 0.75 * m.pdf(np.array([0.0]), [0, 1]))
    with pytest.raises(ValueError):
        TrueDistribution.from_model(m, [0.0, 1.0]).contaminate(2.0, 1.5)


def test_empirical_rejects_empty_sample():
    with pytest.raises(ValueError):
        TrueDistribution.empirical([], make_model("normal").support)


@settings(max_examples=30, deadline=None)
@given(mu=st.floats(-5, 5), s2=st.floats(0.2, 5), x=st.floats(-10, 10))
def test_normal_score_integrates_pdf_gradient(mu, s2, x):
    m = make_model("normal")
    theta = np.array([mu, s2])
    xs = np.array([x])
    assert_allclose(m.density_grad(xs, theta), m.pdf(xs, theta)[:, None] * m.score(xs, theta),
                    rtol=1e-12, atol=1e-300)
