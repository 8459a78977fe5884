"""
Divergence kernels D(a, b) with a = g(x) the true density and b = f(x) the
model density, so that rho(g, f) = integral of D(g, f) dmu.

Each kernel exposes D and the partials

    d2  = dD/db,   d12 = d2D/da db,   d22 = d2D/db2,

together with the rescaled versions ``bd2 = b d2``, ``bd12 = b d12`` and
``bbd22 = b^2 d22`` that the estimating equations actually use (grad f =
f u), which stay finite where the model density underflows.

Kernels whose D is affine in ``a`` up to a theta-free term (density power
divergences, and S-divergences with A = 1) can be integrated against point
mass contamination exactly; ``affine`` marks them and ``theta_part`` drops
the theta-free term.
"""

import re
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "DivergenceKernel",
    "DPDKernel",
    "SDivKernel",
    "DisparityKernel",
    "DisparityGenerator",
    "SDivParams",
    "dpd_kernel",
    "kl_kernel",
    "sdiv_kernel",
    "disparity_kernel",
    "power_divergence_generator",
    "parse_kernel",
]


def _arr(a, b):
    return np.asarray(a, dtype=float), np.asarray(b, dtype=float)


def _logs(a, b, logb):
    with np.errstate(divide="ignore"):
        la = np.log(a)
        lb = np.log(b) if logb is None else np.asarray(logb, dtype=float)
    return la, lb


class DivergenceKernel:
    """Integrand of a density based divergence and its partial derivatives."""

    name = "kernel"
    affine = False

    def D(self, a, b, logb=None):
        raise NotImplementedError

    def bd2(self, a, b):
        raise NotImplementedError

    def bd12(self, a, b):
        raise NotImplementedError

    def bbd22(self, a, b):
        raise NotImplementedError

    def d2(self, a, b):
        a, b = _arr(a, b)
        return self.bd2(a, b) / b

    def d12(self, a, b):
        a, b = _arr(a, b)
        return self.bd12(a, b) / b

    def d22(self, a, b):
        a, b = _arr(a, b)
        return self.bbd22(a, b) / b ** 2

    def theta_part(self, a, b, logb=None):
        """D(a, b) minus its theta-free part; affine kernels only."""
        raise NotImplementedError(f"{self.name} is not affine in the true density")

    def __call__(self, a, b):
        return self.D(a, b)

    def __repr__(self):
        return self.name


# ---------------------------------------------------------------------------
# density power divergence


class DPDKernel(DivergenceKernel):
    """Density power divergence with tuning parameter alpha >= 0.

    alpha = 0 is the likelihood disparity a log(a/b) + b - a.
    """

    affine = True

    def __init__(self, alpha):
        alpha = float(alpha)
        if not alpha >= 0:
            raise ValueError(f"DPD tuning parameter must be >= 0, got {alpha}")
        self.alpha = alpha
        self.name = "kl" if alpha == 0 else f"dpd({alpha:g})"

    @property
    def params(self):
        return {"alpha": self.alpha}

    def D(self, a, b, logb=None):
        a, b = _arr(a, b)
        al = self.alpha
        if al == 0:
            la, lb = _logs(a, b, logb)
            with np.errstate(invalid="ignore"):
                return np.where(a > 0, a * (la - lb), 0.0) + b - a
        return b ** (1 + al) - (1 + al) / al * b ** al * a + a ** (1 + al) / al

    def theta_part(self, a, b, logb=None):
        a, b = _arr(a, b)
        al = self.alpha
        if al == 0:
            _, lb = _logs(a, b, logb)
            with np.errstate(invalid="ignore"):
                return b - np.where(a > 0, a * lb, 0.0)
        return b ** (1 + al) - (1 + al) / al * b ** al * a

    def d2(self, a, b):
        a, b = _arr(a, b)
        al = self.alpha
        return (1 + al) * (b ** al - b ** (al - 1) * a)

    def d12(self, a, b):
        a, b = _arr(a, b)
        al = self.alpha
        return -(1 + al) * b ** (al - 1) * np.ones_like(a)

    def d22(self, a, b):
        a, b = _arr(a, b)
        al = self.alpha
        return (1 + al) * (al * b ** (al - 1) - (al - 1) * b ** (al - 2) * a)

    def bd2(self, a, b):
        a, b = _arr(a, b)
        al = self.alpha
        return (1 + al) * (b ** (1 + al) - b ** al * a)

    def bd12(self, a, b):
        a, b = _arr(a, b)
        al = self.alpha
        return -(1 + al) * b ** al * np.ones_like(a)

    def bbd22(self, a, b):
        a, b = _arr(a, b)
        al = self.alpha
        return (1 + al) * (al * b ** (1 + al) - (al - 1) * b ** al * a)


def dpd_kernel(alpha):
    """Density power divergence kernel; alpha = 0 gives the KL kernel."""
    return DPDKernel(alpha)


def kl_kernel():
    return DPDKernel(0.0)


# ---------------------------------------------------------------------------
# S-divergence


@dataclass(frozen=True)
class SDivParams:
    alpha: float
    lam: float

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError("S-divergence alpha must be >= 0")

    @property
    def A(self):
        return 1.0 + self.lam * (1.0 - self.alpha)

    @property
    def B(self):
        return self.alpha - self.lam * (1.0 - self.alpha)


_LIMIT_TOL = 1e-12


def _diff_quot(base, other, c, L):
    """(other - base) / c where other = base * exp(c L); stable as c -> 0."""
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        if abs(c) < _LIMIT_TOL:
            out = base * L
        else:
            cl = c * L
            small = np.abs(cl) < 0.5
            out = np.where(small, base * np.expm1(np.where(small, cl, 0.0)) / c,
                           (other - base) / c)
    return np.where(base == 0, np.where(other == 0, 0.0, out), out)


class SDivKernel(DivergenceKernel):
    """S-divergence with parameters (alpha, lambda).

    With A = 1 + lambda (1 - alpha) and B = alpha - lambda (1 - alpha),

        D(a, b) = b^(1+alpha)/A - (1+alpha)/(A B) b^B a^A + a^(1+alpha)/B,

    and the A = 0 or B = 0 members are the continuous limits.
    """

    def __init__(self, alpha, lam):
        self.sp = SDivParams(float(alpha), float(lam))
        self.alpha = self.sp.alpha
        self.lam = self.sp.lam
        self.A = self.sp.A
        self.B = self.sp.B
        if abs(self.A) < _LIMIT_TOL:
            self.A = 0.0
        if abs(self.B) < _LIMIT_TOL:
            self.B = 0.0
        self.affine = self.A == 1.0
        self.name = f"sdiv({self.alpha:g},{self.lam:g})"

    @property
    def params(self):
        return {"alpha": self.alpha, "lambda": self.lam}

    def _terms(self, a, b, logb=None):
        a, b = _arr(a, b)
        la, lb = _logs(a, b, logb)
        al, A, B = self.alpha, self.A, self.B
        with np.errstate(invalid="ignore", over="ignore"):
            t1 = np.exp((1 + al) * lb)
            t2 = np.where(a > 0, np.exp(B * lb + A * la), 0.0 if A > 0 else np.inf)
            t3 = np.exp((1 + al) * la)
            L = la - lb
        return t1, t2, t3, L, la, lb

    def D(self, a, b, logb=None):
        t1, t2, t3, L, _, _ = self._terms(a, b, logb)
        return _diff_quot(t2, t3, self.B, L) - _diff_quot(t1, t2, self.A, L)

    def theta_part(self, a, b, logb=None):
        if not self.affine:
            return super().theta_part(a, b, logb)
        return DPDKernel(self.alpha).theta_part(a, b, logb)

    def bd2(self, a, b):
        t1, t2, _, L, _, _ = self._terms(a, b)
        return -(1 + self.alpha) * _diff_quot(t1, t2, self.A, L)

    def bd12(self, a, b):
        a, b = _arr(a, b)
        la, lb = _logs(a, b, None)
        with np.errstate(invalid="ignore", over="ignore"):
            out = -(1 + self.alpha) * np.exp(self.B * lb + (self.A - 1) * la)
        # both densities underflowed: take the limit along a = b
        return np.where((a == 0) & (b == 0), 0.0, out)

    def bbd22(self, a, b):
        t1, t2, _, L, _, _ = self._terms(a, b)
        al = self.alpha
        return (1 + al) * (t2 - al * _diff_quot(t1, t2, self.A, L))


def sdiv_kernel(params, lam=None):
    """S-divergence kernel from ``SDivParams``, a pair ``(alpha, lam)`` or
    the two numbers ``sdiv_kernel(alpha, lam)``."""
    if isinstance(params, SDivParams):
        return SDivKernel(params.alpha, params.lam)
    if lam is None:
        params, lam = params
    return SDivKernel(params, lam)


# ---------------------------------------------------------------------------
# disparities


@dataclass(frozen=True)
class DisparityGenerator:
    """Strictly convex C on [-1, inf) with C(0) = C'(0) = 0 and its derivatives.

    ``lam`` is set for Cressie-Read members; the residual adjustment
    function then uses closed forms in r = delta + 1, which keep the
    delta = -1 (zero true density) limits exact.
    """

    name: str
    C: object
    dC: object
    d2C: object
    d3C: object
    lam: float = None

    def raf(self, delta):
        """Residual adjustment function A(delta) = C'(delta)(delta + 1) - C(delta)."""
        delta = np.asarray(delta, dtype=float)
        if self.lam is None:
            return self.dC(delta) * (delta + 1) - self.C(delta)
        r = delta + 1.0
        with np.errstate(divide="ignore", over="ignore"):
            if self.lam == -1.0:
                return np.log(r)
            c = self.lam + 1.0
            return np.expm1(c * np.log(r)) / c

    def raf_prime(self, delta):
        """A'(delta) = C''(delta)(delta + 1)."""
        delta = np.asarray(delta, dtype=float)
        if self.lam is None:
            return self.d2C(delta) * (delta + 1)
        with np.errstate(divide="ignore"):
            return np.power(delta + 1.0, self.lam)

    def raf_prime_r(self, delta):
        """A'(delta)(delta + 1), finite at delta = -1 whenever the kernel is."""
        delta = np.asarray(delta, dtype=float)
        if self.lam is None:
            return self.d2C(delta) * (delta + 1) ** 2
        with np.errstate(divide="ignore"):
            return np.power(delta + 1.0, self.lam + 1.0)


def power_divergence_generator(lam):
    """Cressie-Read power divergence generator

        C(delta) = ((delta+1)^(lam+1) - (delta+1)) / (lam (lam+1)) - delta / (lam+1),

    with the continuous limits at lam = 0 (likelihood disparity) and
    lam = -1.
    """
    lam = float(lam)

    if lam == 0.0:
        def C(d):
            d = np.asarray(d, dtype=float)
            return special.xlogy(d + 1, d + 1) - d

        def dC(d):
            return np.log1p(np.asarray(d, dtype=float))

        def d2C(d):
            return 1.0 / (1.0 + np.asarray(d, dtype=float))

        def d3C(d):
            return -1.0 / (1.0 + np.asarray(d, dtype=float)) ** 2
    elif lam == -1.0:
        def C(d):
            d = np.asarray(d, dtype=float)
            return d - np.log1p(d)

        def dC(d):
            d = np.asarray(d, dtype=float)
            return d / (1.0 + d)

        def d2C(d):
            return (1.0 + np.asarray(d, dtype=float)) ** -2

        def d3C(d):
            return -2.0 * (1.0 + np.asarray(d, dtype=float)) ** -3
    else:
        def C(d):
            d = np.asarray(d, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                ell = np.log1p(d)
                em = np.where(d == -1, -1.0, np.expm1(lam * ell))
                out = (d + 1) * em / (lam * (lam + 1)) - d / (lam + 1)
            # at delta = -1 the limit is 1/(lam+1), or +inf when lam < -1
            return np.where(d == -1, 1.0 / (lam + 1) if lam > -1 else np.inf, out)

        def dC(d):
            d = np.asarray(d, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.expm1(lam * np.log1p(d)) / lam

        def d2C(d):
            with np.errstate(divide="ignore"):
                return (1.0 + np.asarray(d, dtype=float)) ** (lam - 1)

        def d3C(d):
            with np.errstate(divide="ignore"):
                return (lam - 1) * (1.0 + np.asarray(d, dtype=float)) ** (lam - 2)

    return DisparityGenerator(f"power({lam:g})", C, dC, d2C, d3C, lam)


class DisparityKernel(DivergenceKernel):
    """Disparity kernel D(a, b) = C(a/b - 1) b for a generator C."""

    affine = False

    def __init__(self, generator):
        self.generator = generator
        self.name = f"disparity({generator.name})"

    @property
    def params(self):
        return {"generator": self.generator.name}

    def _delta(self, a, b):
        a, b = _arr(a, b)
        if np.any(b < 0) or np.any(a < 0):
            raise ValueError("disparity kernels need non-negative densities")
        with np.errstate(divide="ignore", invalid="ignore"):
            return a / b - 1.0, a, b

    @staticmethod
    def _clean(out, a, b):
        # both densities zero: no contribution
        return np.where((a == 0) & (b == 0), 0.0, out)

    def D(self, a, b, logb=None):
        d, a, b = self._delta(a, b)
        with np.errstate(invalid="ignore"):
            return self._clean(self.generator.C(d) * b, a, b)

    def bd2(self, a, b):
        d, a, b = self._delta(a, b)
        with np.errstate(invalid="ignore"):
            return self._clean(-self.generator.raf(d) * b, a, b)

    def bd12(self, a, b):
        d, a, b = self._delta(a, b)
        with np.errstate(invalid="ignore"):
            return self._clean(-self.generator.raf_prime(d) * np.ones_like(b), a, b)

    def bbd22(self, a, b):
        d, a, b = self._delta(a, b)
        with np.errstate(invalid="ignore"):
            return self._clean(self.generator.raf_prime_r(d) * b, a, b)

    def raf(self, delta):
        return self.generator.raf(delta)

    def raf_prime(self, delta):
        return self.generator.raf_prime(delta)


def disparity_kernel(generator):
    return DisparityKernel(generator)


# ---------------------------------------------------------------------------
# config names

_NAMED_LAMBDAS = {
    "likelihood": 0.0,
    "hellinger": -0.5,
    "pearson": 1.0,
    "neyman": -2.0,
    "kl_reverse": -1.0,
}

_CALL = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")


def parse_kernel(text):
    """Parse ``kl``, ``dpd(alpha)``, ``sdiv(alpha, lambda)`` or
    ``disparity(power, lambda)`` / ``disparity(hellinger)``."""
    m = _CALL.match(str(text).lower())
    if not m:
        raise ValueError(f"cannot parse kernel spec {text!r}")
    head, body = m.group(1), m.group(2)
    args = [s.strip() for s in body.split(",")] if body else []
    try:
        if head == "kl" and not args:
            return kl_kernel()
        if head == "dpd" and len(args) == 1:
            return dpd_kernel(float(args[0]))
        if head == "sdiv" and len(args) == 2:
            return sdiv_kernel(float(args[0]), float(args[1]))
        if head == "disparity":
            if len(args) == 2 and args[0] == "power":
                return disparity_kernel(power_divergence_generator(float(args[1])))
            if len(args) == 1 and args[0] in _NAMED_LAMBDAS:
                return disparity_kernel(power_divergence_generator(_NAMED_LAMBDAS[args[0]]))
    except ValueError as exc:
        raise ValueError(f"bad kernel spec {text!r}: {exc}") from None
    raise ValueError(f"cannot parse kernel spec {text!r}")
