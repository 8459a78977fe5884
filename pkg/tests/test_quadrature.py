import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from mdivif.errors import QuadratureError
from mdivif.models import TrueDistribution, make_model
from mdivif.quadrature import QuadratureSpec, expectation_under, integrate, integrate_coupled
from mdivif.support import NONNEGATIVE_INTEGERS, POSITIVE_HALF_LINE, REAL_LINE, SupportDescriptor, SupportKind


def test_gaussian_moments_on_real_line():
    f = lambda x: stats.norm.pdf(x, 1.5, 2.0)[:, None] * np.stack([np.ones_like(x), x, x * x], 1)
    res = integrate(f, REAL_LINE, windows=[(1.5, 2.0)])
    assert_allclose(res.value, [1.0, 1.5, 1.5 ** 2 + 4.0], rtol=1e-10)


def test_half_line_with_integrable_endpoint_singularity():
    # int_0^inf x^{-1/2} e^{-x} dx = sqrt(pi)
    res = integrate(lambda x: x ** -0.5 * np.exp(-x), POSITIVE_HALF_LINE, windows=[(1.0, 1.0)])
    assert_allclose(res.value, np.sqrt(np.pi), rtol=1e-8)


def test_discrete_sum_with_tail_bound():
    lam = 40.0
    res = integrate(lambda k: k * stats.poisson.pmf(k, lam), NONNEGATIVE_INTEGERS,
                    windows=[(lam, np.sqrt(lam))])
    assert_allclose(res.value, lam, rtol=1e-11)


def test_gauss_hermite_matches_moments_in_two_dimensions():
    sup = SupportDescriptor(SupportKind.REAL_LINE, 2)
    mu = np.array([0.3, -1.0])

    def f(x):
        dens = stats.multivariate_normal.pdf(x, mu, 0.5 * np.eye(2))
        return dens[:, None] * np.column_stack([np.ones(len(x)), x[:, 0] * x[:, 1]])

    res = integrate(f, sup, windows=[(mu, np.sqrt(0.5))])
    assert_allclose(res.value, [1.0, mu[0] * mu[1]], rtol=1e-10, atol=1e-12)


def test_non_finite_integrand_raises():
    with pytest.raises(QuadratureError):
        integrate(lambda x: np.where(np.abs(x) < 1, np.nan, 0.0), REAL_LINE)


def test_budget_exhaustion_raises():
    spec = QuadratureSpec(max_evals=100, abs_tol=1e-15, rel_tol=1e-15)
    with pytest.raises(QuadratureError):
        integrate(lambda x: np.abs(np.sin(40 * x)) * np.exp(-x * x), REAL_LINE, spec)


def test_invalid_spec_rejected():
    with pytest.raises(ValueError):
        QuadratureSpec(abs_tol=0.0)
    with pytest.raises(ValueError):
        QuadratureSpec(method="simpson")


def test_point_mass_is_added_exactly():
    m = make_model("normal")
    g = TrueDistribution.from_model(m, [0.0, 1.0]).contaminate(7.0, 0.2)
    val = expectation_under(g, lambda x: x[:, None], windows=m.windows([0.0, 1.0]))
    assert_allclose(val, [0.2 * 7.0], atol=1e-12)


def test_coupled_affine_split_matches_direct_sum_on_integers():
    # on a discrete support the atom is an ordinary mass, so the affine
    # split and the plain sum must agree
    m = make_model("poisson")
    g = TrueDistribution.from_model(m, [2.0]).contaminate(3.0, 0.1)
    func = lambda a, x: (a * (1.0 + x))[:, None]
    v1, _ = integrate_coupled(g, func, windows=m.windows([2.0]), affine=True)
    v2, _ = integrate_coupled(g, func, windows=m.windows([2.0]), affine=False)
    assert_allclose(v1, v2, rtol=1e-12)
