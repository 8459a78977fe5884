"""
The divergence rho(g, f_theta) with its theta-gradient and Hessian.

All three are integrated under one shared subdivision so that the Newton
iterations in ``estimator`` and the matrices in ``influence`` see mutually
consistent values. In score form, with a = g(x), b = f_theta(x),

    grad rho = int (b D2) u,
    hess rho = int (b D2)(u u^T - i) + (b^2 D22) u u^T,

the Hessian being the matrix N of the influence function.
"""

from dataclasses import dataclass

import numpy as np

from .errors import KernelInapplicableError
from .quadrature import integrate_coupled

__all__ = ["DivergenceTerms", "divergence_terms", "check_applicable"]


@dataclass
class DivergenceTerms:
    value: float
    grad: np.ndarray
    hess: np.ndarray
    #: True when the theta-free part of the integrand was dropped
    theta_only: bool


def check_applicable(kernel, g):
    """Raise unless ``kernel`` can be integrated against ``g``.

    Point masses on a continuous support have no density; only kernels
    that are affine in the true density can absorb them exactly.
    """
    if not g.support.is_discrete and g.atoms and not kernel.affine:
        raise KernelInapplicableError(
            f"{kernel.name} is not affine in the true density, so it cannot be "
            f"evaluated against point masses on a continuous support "
            f"(contaminated or empirical g); use a discrete model or an affine "
            f"kernel such as dpd(alpha)")


def _integrand(model, kernel, theta, order, theta_only):
    def func(a, x):
        a = np.asarray(a, dtype=float)
        logb = model.logpdf(x, theta)
        b = np.exp(logb)
        if theta_only:
            val = kernel.theta_part(a, b, logb)
        else:
            val = kernel.D(a, b, logb)
        n = len(a)
        out = [np.reshape(val, (n, 1))]
        if order >= 1:
            u = model.score(x, theta)
            bd2 = np.reshape(kernel.bd2(a, b), (n,))
            out.append(bd2[:, None] * u)
            if order >= 2:
                uu = u[:, :, None] * u[:, None, :]
                bbd22 = np.reshape(kernel.bbd22(a, b), (n,))
                hess = bd2[:, None, None] * (uu - model.info(x, theta)) + bbd22[:, None, None] * uu
                out.append(hess.reshape(n, -1))
        return np.concatenate(out, axis=1)
    return func


def divergence_terms(model, kernel, g, theta, spec=None, order=2):
    """Evaluate rho(g, f_theta) and, up to ``order``, its derivatives.

    When ``g`` carries point masses on a continuous support (contaminated
    or empirical), the theta-free term of D is dropped: the reported value
    is then rho up to an additive constant.
    """
    check_applicable(kernel, g)
    theta = model.check(theta)
    p = model.p
    theta_only = (not g.support.is_discrete) and bool(g.atoms)
    func = _integrand(model, kernel, theta, order, theta_only)
    value, _ = integrate_coupled(g, func, spec, model.windows(theta), affine=kernel.affine)
    grad = value[1:1 + p] if order >= 1 else None
    hess = None
    if order >= 2:
        hess = value[1 + p:].reshape(p, p)
        hess = 0.5 * (hess + hess.T)
    return DivergenceTerms(float(value[0]), grad, hess, theta_only)
