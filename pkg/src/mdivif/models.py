"""
Parametric model families and true distributions.

Every model supplies its density, log density, score ``u`` and the
per-observation information ``i = -grad u`` in closed form. The density
gradient and Hessian follow from the identities

    grad f = f u,        grad2 f = f (u u^T - i),

so they are exact as well. Variance parameters are stored as ``sigma2``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import InvalidParameterError
from .quadrature import integrate
from .support import (
    NONNEGATIVE_INTEGERS,
    POSITIVE_HALF_LINE,
    REAL_LINE,
    SupportDescriptor,
    SupportKind,
)

__all__ = [
    "SupportDescriptor",
    "SupportKind",
    "ParametricModel",
    "Normal",
    "MVNormalIsotropic",
    "Poisson",
    "Exponential",
    "TrueDistribution",
    "builtin_models",
    "make_model",
    "fisher_info",
    "sample",
]

_LOG2PI = np.log(2.0 * np.pi)


class ParametricModel:
    """Base class for a family {f_theta}.

    Subclasses implement ``_validate``, ``logpdf``, ``score``, ``info``,
    ``window`` and ``rvs``. ``x`` is an array of shape ``(n,)`` for one
    dimensional observations and ``(n, d)`` otherwise.
    """

    name = "model"
    support: SupportDescriptor = REAL_LINE
    param_names: tuple = ()
    #: parameters that must stay strictly positive
    positive: tuple = ()

    @property
    def p(self):
        return len(self.param_names)

    def check(self, theta):
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.shape != (self.p,):
            raise InvalidParameterError(
                f"{self.name}: expected {self.p} parameters, got {theta.shape[0]}")
        if not np.all(np.isfinite(theta)):
            raise InvalidParameterError(f"{self.name}: non-finite parameter {theta}")
        for k in self.positive:
            if theta[k] <= 0:
                raise InvalidParameterError(
                    f"{self.name}: {self.param_names[k]} must be > 0, got {theta[k]}")
        return theta

    def _x(self, x):
        x = np.asarray(x, dtype=float)
        if self.support.dim == 1:
            return x.reshape(-1)
        return x.reshape(-1, self.support.dim)

    def pdf(self, x, theta):
        return np.exp(self.logpdf(x, theta))

    def density_grad(self, x, theta):
        """Gradient of f_theta(x) in theta, shape (n, p)."""
        return self.pdf(x, theta)[:, None] * self.score(x, theta)

    def density_hess(self, x, theta):
        """Hessian of f_theta(x) in theta, shape (n, p, p)."""
        u = self.score(x, theta)
        uu = u[:, :, None] * u[:, None, :]
        return self.pdf(x, theta)[:, None, None] * (uu - self.info(x, theta))

    def score_deriv(self, x, theta):
        """The matrix i_theta(x) = -grad u_theta(x)."""
        return self.info(x, theta)

    def windows(self, theta):
        return [self.window(theta)]

    def __repr__(self):
        return f"{type(self).__name__}()"


class Normal(ParametricModel):
    """Univariate normal with theta = (mu, sigma2).

    Passing ``sigma2`` fixes the variance and leaves theta = (mu,).
    """

    support = REAL_LINE

    def __init__(self, sigma2=None):
        if sigma2 is not None and not sigma2 > 0:
            raise InvalidParameterError("known variance must be > 0")
        self.sigma2 = sigma2
        if sigma2 is None:
            self.name = "normal"
            self.param_names = ("mu", "sigma2")
            self.positive = (1,)
        else:
            self.name = "normal"
            self.param_names = ("mu",)
            self.positive = ()

    def _split(self, theta):
        theta = self.check(theta)
        if self.sigma2 is None:
            return theta[0], theta[1]
        return theta[0], self.sigma2

    def logpdf(self, x, theta):
        mu, v = self._split(theta)
        x = self._x(x)
        return -0.5 * (_LOG2PI + np.log(v)) - 0.5 * (x - mu) ** 2 / v

    def score(self, x, theta):
        mu, v = self._split(theta)
        r = self._x(x) - mu
        if self.sigma2 is not None:
            return (r / v)[:, None]
        return np.stack([r / v, -0.5 / v + 0.5 * r ** 2 / v ** 2], axis=1)

    def info(self, x, theta):
        mu, v = self._split(theta)
        r = self._x(x) - mu
        n = r.shape[0]
        if self.sigma2 is not None:
            return np.full((n, 1, 1), 1.0 / v)
        out = np.empty((n, 2, 2))
        out[:, 0, 0] = 1.0 / v
        out[:, 0, 1] = out[:, 1, 0] = r / v ** 2
        out[:, 1, 1] = -0.5 / v ** 2 + r ** 2 / v ** 3
        return out

    def window(self, theta):
        mu, v = self._split(theta)
        return (mu, np.sqrt(v))

    def rvs(self, theta, n, rng):
        mu, v = self._split(theta)
        return rng.normal(mu, np.sqrt(v), size=n)

    def __repr__(self):
        return f"Normal(sigma2={self.sigma2})" if self.sigma2 is not None else "Normal()"


class MVNormalIsotropic(ParametricModel):
    """d-variate normal N(mu, sigma2 I_d) with theta = (mu_1..mu_d, sigma2).

    Passing ``sigma2`` fixes the variance and leaves theta = mu.
    """

    name = "mvnormal_isotropic"

    def __init__(self, dim=2, sigma2=None):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        if sigma2 is not None and not sigma2 > 0:
            raise InvalidParameterError("known variance must be > 0")
        self.dim = int(dim)
        self.sigma2 = sigma2
        self.support = SupportDescriptor(SupportKind.REAL_LINE, self.dim)
        names = tuple(f"mu{k + 1}" for k in range(self.dim))
        if sigma2 is None:
            self.param_names = names + ("sigma2",)
            self.positive = (self.dim,)
        else:
            self.param_names = names
            self.positive = ()

    def _split(self, theta):
        theta = self.check(theta)
        if self.sigma2 is None:
            return theta[:-1], theta[-1]
        return theta, self.sigma2

    def logpdf(self, x, theta):
        mu, v = self._split(theta)
        r = self._x(x) - mu
        return -0.5 * self.dim * (_LOG2PI + np.log(v)) - 0.5 * np.sum(r ** 2, axis=1) / v

    def score(self, x, theta):
        mu, v = self._split(theta)
        r = self._x(x) - mu
        if self.sigma2 is not None:
            return r / v
        s2 = np.sum(r ** 2, axis=1)
        return np.concatenate([r / v, (-0.5 * self.dim / v + 0.5 * s2 / v ** 2)[:, None]], axis=1)

    def info(self, x, theta):
        mu, v = self._split(theta)
        r = self._x(x) - mu
        n, d = r.shape
        out = np.zeros((n, self.p, self.p))
        out[:, np.arange(d), np.arange(d)] = 1.0 / v
        if self.sigma2 is None:
            out[:, :d, d] = out[:, d, :d] = r / v ** 2
            out[:, d, d] = -0.5 * d / v ** 2 + np.sum(r ** 2, axis=1) / v ** 3
        return out

    def window(self, theta):
        mu, v = self._split(theta)
        return (mu, np.sqrt(v))

    def rvs(self, theta, n, rng):
        mu, v = self._split(theta)
        return mu + np.sqrt(v) * rng.standard_normal((n, self.dim))

    def __repr__(self):
        return f"MVNormalIsotropic(dim={self.dim}, sigma2={self.sigma2})"


class Poisson(ParametricModel):
    """Poisson(lambda) on the non-negative integers."""

    name = "poisson"
    support = NONNEGATIVE_INTEGERS
    param_names = ("lambda",)
    positive = (0,)

    def logpdf(self, x, theta):
        lam = self.check(theta)[0]
        x = self._x(x)
        return special.xlogy(x, lam) - lam - special.gammaln(x + 1.0)

    def score(self, x, theta):
        lam = self.check(theta)[0]
        return (self._x(x) / lam - 1.0)[:, None]

    def info(self, x, theta):
        lam = self.check(theta)[0]
        return (self._x(x) / lam ** 2)[:, None, None]

    def window(self, theta):
        lam = self.check(theta)[0]
        return (lam, np.sqrt(lam))

    def rvs(self, theta, n, rng):
        return rng.poisson(self.check(theta)[0], size=n).astype(float)


class Exponential(ParametricModel):
    """Exponential with theta = (rate,), density rate * exp(-rate x)."""

    name = "exponential"
    support = POSITIVE_HALF_LINE
    param_names = ("rate",)
    positive = (0,)

    def logpdf(self, x, theta):
        rate = self.check(theta)[0]
        x = self._x(x)
        return np.where(x >= 0, np.log(rate) - rate * x, -np.inf)

    def score(self, x, theta):
        rate = self.check(theta)[0]
        return (1.0 / rate - self._x(x))[:, None]

    def info(self, x, theta):
        rate = self.check(theta)[0]
        return np.full((self._x(x).shape[0], 1, 1), 1.0 / rate ** 2)

    def window(self, theta):
        rate = self.check(theta)[0]
        return (1.0 / rate, 1.0 / rate)

    def rvs(self, theta, n, rng):
        return rng.exponential(1.0 / self.check(theta)[0], size=n)


_BUILTINS = {
    "normal": Normal,
    "mvnormal_isotropic": MVNormalIsotropic,
    "poisson": Poisson,
    "exponential": Exponential,
}


def builtin_models():
    """Catalog of builtin model factories keyed by their config name."""
    return dict(_BUILTINS)


def make_model(name, **options):
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(_BUILTINS)}") from None
    return factory(**options)


def fisher_info(model, theta, spec=None):
    """Fisher information E[u u^T] by quadrature over the model's support."""
    theta = model.check(theta)

    def integrand(x):
        u = model.score(x, theta)
        return model.pdf(x, theta)[:, None, None] * u[:, :, None] * u[:, None, :]

    return integrate(integrand, model.support, spec, model.windows(theta)).value


def sample(model, theta, n, seed):
    """Draw ``n`` i.i.d. observations; identical output for identical seeds."""
    if n < 1:
        raise ValueError("sample size must be >= 1")
    theta = model.check(theta)
    return model.rvs(theta, int(n), np.random.default_rng(seed))


# ---------------------------------------------------------------------------
# true distributions


@dataclass(frozen=True)
class _Component:
    weight: float
    model: ParametricModel
    theta: np.ndarray


@dataclass(frozen=True)
class TrueDistribution:
    """Distribution G generating the data.

    A finite mixture of model elements (the "continuous part", a pmf on
    discrete supports) plus point masses. ``contaminate(y, eps)`` gives
    ``(1 - eps) G + eps * delta_y``. The empirical distribution of a sample
    is the special case with no continuous part.
    """

    support: SupportDescriptor
    components: tuple = ()
    atoms: tuple = ()
    label: str = field(default="", compare=False)

    def __post_init__(self):
        total = sum(c.weight for c in self.components) + sum(w for _, w in self.atoms)
        if not np.isclose(total, 1.0, rtol=0, atol=1e-12):
            raise ValueError(f"true distribution weights sum to {total}, not 1")
        for loc, w in self.atoms:
            if not w >= 0:
                raise ValueError("point masses must be non-negative")
            if not np.all(self.support.contains(np.asarray(loc)[None] if self.support.dim == 1
                                                else np.asarray(loc)[None, :])):
                raise ValueError(f"point mass location {loc} lies outside the support")

    @classmethod
    def from_model(cls, model, theta):
        theta = model.check(theta)
        return cls(model.support, (_Component(1.0, model, theta),),
                   label=f"{model.name}{tuple(np.round(theta, 12))}")

    @classmethod
    def mixture(cls, parts):
        """Mixture from ``[(weight, model, theta), ...]`` on one common support."""
        comps = tuple(_Component(float(w), m, m.check(t)) for w, m, t in parts)
        support = comps[0].model.support
        if any(c.model.support != support for c in comps):
            raise ValueError("mixture components must share a support")
        return cls(support, comps, label="mixture")

    @classmethod
    def empirical(cls, data, support):
        data = np.asarray(data, dtype=float)
        if data.size == 0:
            raise ValueError("empirical distribution of an empty sample")
        if support.dim == 1:
            data = data.reshape(-1)
            locs, counts = np.unique(data, return_counts=True)
            atoms = tuple((float(l), c / data.shape[0]) for l, c in zip(locs, counts))
        else:
            data = data.reshape(-1, support.dim)
            atoms = tuple((row.copy(), 1.0 / data.shape[0]) for row in data)
        return cls(support, (), atoms, label=f"empirical(n={data.shape[0]})")

    def contaminate(self, y, eps):
        """Return (1 - eps) G + eps delta_y."""
        if not 0.0 <= eps < 1.0:
            raise ValueError("contamination mass must satisfy 0 <= eps < 1")
        if self.support.dim == 1:
            y = float(np.asarray(y).reshape(()))
        else:
            y = np.asarray(y, dtype=float).reshape(self.support.dim)
        comps = tuple(_Component(c.weight * (1 - eps), c.model, c.theta) for c in self.components)
        atoms = tuple((loc, w * (1 - eps)) for loc, w in self.atoms) + ((y, float(eps)),)
        return TrueDistribution(self.support, comps, atoms, label=f"{self.label}+{eps:g}@{y}")

    @property
    def continuous_weight(self):
        return sum(c.weight for c in self.components)

    def continuous_density(self, x):
        """Density of the mixture part (atoms excluded)."""
        x = np.asarray(x, dtype=float)
        n = x.shape[0]
        out = np.zeros(n)
        for c in self.components:
            out += c.weight * c.model.pdf(x, c.theta)
        return out

    def density(self, x):
        """Pointwise density g(x); on discrete supports atoms are included."""
        out = self.continuous_density(x)
        if self.support.is_discrete and self.atoms:
            x = np.asarray(x, dtype=float).reshape(-1)
            for loc, w in self.atoms:
                out = out + w * (x == loc)
        return out

    def windows(self):
        out = [c.model.window(c.theta) for c in self.components]
        if self.support.is_discrete:
            out += [(loc, 1.0) for loc, _ in self.atoms]
        return out

    def model_element(self):
        """``(model, theta)`` when G is a single uncontaminated model element."""
        if len(self.components) == 1 and not self.atoms:
            c = self.components[0]
            return c.model, c.theta
        return None

    def __repr__(self):
        return f"TrueDistribution({self.label or self.support.kind.value})"
