"""
Equality restrictions h(theta) = 0 on the parameter space.

A ``Constraint`` carries the restriction function ``h`` (r-vector), its
p x r derivative matrix ``H = dh/dtheta``, and where possible a
parametrization theta = psi(nu) of the restricted set by q free
coordinates together with the p x q Jacobian ``P = dpsi/dnu``.

Factories cover the cases used throughout the package: no restriction,
pinned components, linear restrictions, and the rank-deficient family
theta_1 = phi(beta) of a scalar beta (e.g. mu = beta mu0 for an isotropic
normal).
"""

import numpy as np
from scipy import linalg, optimize

from .errors import ConstraintError

__all__ = [
    "Constraint",
    "PhiMap",
    "no_constraint",
    "fixed_components",
    "linear_constraint",
    "phi_of_beta",
    "proportional_mean",
]


def _fd_jacobian(fun, x, step=1e-6):
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(fun(x))
    out = np.empty(f0.shape + x.shape)
    for k in range(x.size):
        h = step * max(1.0, abs(x[k]))
        e = np.zeros_like(x)
        e[k] = h
        out[..., k] = (np.asarray(fun(x + e)) - np.asarray(fun(x - e))) / (2 * h)
    return out


class PhiMap:
    """Curve beta -> phi(beta) in R^r with componentwise derivatives.

    Parameters
    ----------
    phi, dphi, d2phi : callable
        Scalar beta to r-vectors: the map and its first two derivatives.
        Every component of ``dphi`` must be non-zero at the points used.
    beta_of : callable, optional
        Left inverse theta_1 -> beta. Defaults to least squares.
    """

    def __init__(self, phi, dphi, d2phi, beta_of=None):
        self.phi = phi
        self.dphi = dphi
        self.d2phi = d2phi
        self._beta_of = beta_of

    def beta_of(self, theta1):
        theta1 = np.asarray(theta1, dtype=float)
        if self._beta_of is not None:
            return float(self._beta_of(theta1))
        d = np.asarray(self.dphi(0.0), dtype=float)
        b0 = float(d @ (theta1 - self.phi(0.0)) / (d @ d))
        sol = optimize.least_squares(lambda b: self.phi(b[0]) - theta1, [b0],
                                     jac=lambda b: np.asarray(self.dphi(b[0]))[:, None],
                                     xtol=1e-15, ftol=1e-15, gtol=1e-15)
        return float(sol.x[0])

    def B(self, beta):
        """Matrix with entries b_ij = phi_j'(beta) / phi_i'(beta)."""
        d = np.asarray(self.dphi(beta), dtype=float)
        if np.any(d == 0):
            raise ConstraintError("phi has a zero derivative component at beta")
        return d[None, :] / d[:, None]

    def B1(self, beta):
        """r x r^2 matrix of d b_ij / d theta_k, column index j * r + k."""
        d = np.asarray(self.dphi(beta), dtype=float)
        d2 = np.asarray(self.d2phi(beta), dtype=float)
        r = d.size
        # (phi_j'' phi_i' - phi_j' phi_i'') / (phi_i'^2 phi_k')
        num = d2[None, :] * d[:, None] - d[None, :] * d2[:, None]
        out = num[:, :, None] / (d[:, None, None] ** 2 * d[None, None, :])
        return out.reshape(r, r * r)


class Constraint:
    """Restriction h(theta) = 0 with an optional parametrization psi.

    Attributes
    ----------
    p : int
        Parameter dimension.
    r : int
        Number of restriction equations (columns of ``H``).
    q : int or None
        Number of free coordinates of ``psi``.
    kind : str
        ``"none"``, ``"fixed"``, ``"linear"``, ``"phi"`` or ``"general"``.
    declared_rank : int
        Rank ``H`` is expected to have on the restricted set; ``r - 1`` for
        the phi-of-beta family.
    """

    def __init__(self, p, r, h, H, psi=None, psi_jac=None, psi_hess=None,
                 nu_of=None, kind="general", name=None, fixed_index=None,
                 phi=None, declared_rank=None):
        self.p = int(p)
        self.r = int(r)
        self._h = h
        self._H = H
        self._psi = psi
        self._psi_jac = psi_jac
        self._psi_hess = psi_hess
        self._nu_of = nu_of
        self.kind = kind
        self.name = name or kind
        self.fixed_index = None if fixed_index is None else tuple(int(k) for k in fixed_index)
        self.phi = phi
        self.declared_rank = self.r if declared_rank is None else int(declared_rank)

    # -- restriction ------------------------------------------------------

    def h(self, theta):
        return np.asarray(self._h(np.asarray(theta, dtype=float)), dtype=float).reshape(self.r)

    def H(self, theta):
        return np.asarray(self._H(np.asarray(theta, dtype=float)), dtype=float).reshape(self.p, self.r)

    def numerical_rank(self, theta, tol=1e-8):
        """Number of singular values of H above ``tol`` times the largest."""
        if self.r == 0:
            return 0
        sv = np.linalg.svd(self.H(theta), compute_uv=False)
        return int(np.sum(sv > tol * sv[0]))

    def violation(self, theta):
        return float(np.linalg.norm(self.h(theta))) if self.r else 0.0

    # -- parametrization --------------------------------------------------

    @property
    def has_psi(self):
        return self._psi is not None

    @property
    def q(self):
        if not self.has_psi:
            return None
        return self.psi_jac(self.nu_of(np.zeros(self.p))).shape[1]

    def _need_psi(self):
        if not self.has_psi:
            raise ConstraintError(f"constraint {self.name!r} has no parametrization psi")

    def psi(self, nu):
        self._need_psi()
        return np.asarray(self._psi(np.asarray(nu, dtype=float)), dtype=float).reshape(self.p)

    def psi_jac(self, nu):
        self._need_psi()
        nu = np.asarray(nu, dtype=float)
        if self._psi_jac is None:
            return _fd_jacobian(self.psi, nu)
        return np.asarray(self._psi_jac(nu), dtype=float).reshape(self.p, nu.size)

    def psi_hess(self, nu):
        """Second derivatives of psi, shape (p, q, q)."""
        self._need_psi()
        nu = np.asarray(nu, dtype=float)
        if self._psi_hess is None:
            hs = _fd_jacobian(self.psi_jac, nu, step=1e-5)
            return 0.5 * (hs + np.swapaxes(hs, 1, 2))
        return np.asarray(self._psi_hess(nu), dtype=float).reshape(self.p, nu.size, nu.size)

    def nu_of(self, theta):
        """Free coordinates of a point on (or nearest to) the restricted set."""
        self._need_psi()
        theta = np.asarray(theta, dtype=float)
        if self._nu_of is not None:
            return np.asarray(self._nu_of(theta), dtype=float).reshape(-1)
        raise ConstraintError(f"constraint {self.name!r} cannot map theta back to nu")

    def project(self, theta):
        """psi(nu_of(theta)): a feasible point near ``theta``."""
        return self.psi(self.nu_of(theta))

    def normal_basis(self, theta):
        """Orthonormal basis of the orthogonal complement of range(P)."""
        P = self.psi_jac(self.nu_of(theta))
        return linalg.null_space(P.T)

    def reduced(self):
        """Equivalent full-rank constraint built from the parametrization.

        ``h`` becomes the normal-space coordinates of theta - project(theta)
        and ``H`` an orthonormal basis of the normal space of the restricted
        set, so ``rank(H) = p - q``. Needed for the phi-of-beta family,
        whose own ``H`` is not a basis of that normal space.
        """
        self._need_psi()
        theta0 = self.psi(self.nu_of(np.zeros(self.p)))
        rr = self.normal_basis(theta0).shape[1]

        def H(theta):
            return self.normal_basis(theta)

        def h(theta):
            return H(theta).T @ (theta - self.project(theta))

        return Constraint(self.p, rr, h, H, psi=self._psi, psi_jac=self._psi_jac,
                          psi_hess=self._psi_hess, nu_of=self._nu_of, kind="general",
                          name=f"{self.name}:reduced")

    def __repr__(self):
        return f"Constraint({self.name!r}, p={self.p}, r={self.r})"


def no_constraint(p):
    """The empty restriction (r = 0); psi is the identity."""
    eye = np.eye(p)
    return Constraint(
        p, 0,
        h=lambda t: np.zeros(0),
        H=lambda t: np.zeros((p, 0)),
        psi=lambda nu: nu.copy(),
        psi_jac=lambda nu: eye,
        psi_hess=lambda nu: np.zeros((p, p, p)),
        nu_of=lambda t: t.copy(),
        kind="none", name="none")


def fixed_components(p, index, values):
    """Pin theta[index] = values; the remaining coordinates are free."""
    index = np.atleast_1d(np.asarray(index, dtype=int))
    values = np.atleast_1d(np.asarray(values, dtype=float))
    if index.size != values.size:
        raise ConstraintError("fixed-component index and values differ in length")
    if index.size == 0 or len(set(index.tolist())) != index.size:
        raise ConstraintError("fixed-component index must be non-empty and unique")
    if index.min() < 0 or index.max() >= p:
        raise ConstraintError(f"fixed-component index out of range for p={p}")
    free = np.setdiff1d(np.arange(p), index)
    r, q = index.size, free.size
    Hm = np.zeros((p, r))
    Hm[index, np.arange(r)] = 1.0
    Pm = np.zeros((p, q))
    Pm[free, np.arange(q)] = 1.0

    def psi(nu):
        out = np.empty(p)
        out[index] = values
        out[free] = nu
        return out

    return Constraint(
        p, r,
        h=lambda t: t[index] - values,
        H=lambda t: Hm,
        psi=psi,
        psi_jac=lambda nu: Pm,
        psi_hess=lambda nu: np.zeros((p, q, q)),
        nu_of=lambda t: t[free].copy(),
        kind="fixed", name=f"fixed{tuple(index.tolist())}", fixed_index=index)


def linear_constraint(Hmat, c=None):
    """Linear restriction H^T theta = c with a p x r matrix ``H`` of rank r."""
    Hmat = np.atleast_2d(np.asarray(Hmat, dtype=float))
    p, r = Hmat.shape
    c = np.zeros(r) if c is None else np.atleast_1d(np.asarray(c, dtype=float))
    if np.linalg.matrix_rank(Hmat) < r:
        raise ConstraintError("linear restriction matrix must have full column rank")
    theta_p = np.linalg.lstsq(Hmat.T, c, rcond=None)[0]
    K = linalg.null_space(Hmat.T)
    q = K.shape[1]
    return Constraint(
        p, r,
        h=lambda t: Hmat.T @ t - c,
        H=lambda t: Hmat,
        psi=lambda nu: theta_p + K @ nu,
        psi_jac=lambda nu: K,
        psi_hess=lambda nu: np.zeros((p, q, q)),
        nu_of=lambda t: K.T @ (t - theta_p),
        kind="linear", name="linear")


def phi_of_beta(p, phimap):
    """theta_1 = phi(beta) for the first r = len(phi) coordinates.

    Free coordinates are nu = (beta, theta_2). ``H`` is the matrix
    [I_r - B; 0] with b_ij = phi_j'/phi_i' (B has rank one). The restricted
    set has only r - 1 normal directions, which this H does not span, so
    the general restricted solver refuses the constraint; use
    ``reduced()`` for the tangent-space solution or ``if_rank_deficient``
    for the block solver.
    """
    r = np.asarray(phimap.phi(0.0)).size
    if r > p:
        raise ConstraintError("phi maps into more coordinates than theta has")

    def beta_of(t):
        return phimap.beta_of(t[:r])

    def psi(nu):
        return np.concatenate([np.asarray(phimap.phi(nu[0]), dtype=float), nu[1:]])

    def psi_jac(nu):
        out = np.zeros((p, 1 + p - r))
        out[:r, 0] = phimap.dphi(nu[0])
        out[r:, 1:] = np.eye(p - r)
        return out

    def psi_hess(nu):
        out = np.zeros((p, 1 + p - r, 1 + p - r))
        out[:r, 0, 0] = phimap.d2phi(nu[0])
        return out

    def H(t):
        out = np.zeros((p, r))
        out[:r] = np.eye(r) - phimap.B(beta_of(t))
        return out

    return Constraint(
        p, r,
        h=lambda t: t[:r] - np.asarray(phimap.phi(beta_of(t)), dtype=float),
        H=H, psi=psi, psi_jac=psi_jac, psi_hess=psi_hess,
        nu_of=lambda t: np.concatenate([[beta_of(t)], t[r:]]),
        kind="phi", name="phi-of-beta", phi=phimap, declared_rank=r - 1)


def proportional_mean(mu0, p=None):
    """mu = beta * mu0 for a parameter whose first len(mu0) entries are mu."""
    mu0 = np.asarray(mu0, dtype=float).reshape(-1)
    if np.any(mu0 == 0):
        raise ConstraintError("mu0 entries must be non-zero")
    r = mu0.size
    p = r + 1 if p is None else int(p)
    zero = np.zeros(r)
    phimap = PhiMap(lambda b: b * mu0, lambda b: mu0.copy(), lambda b: zero.copy(),
                    beta_of=lambda t1: float(mu0 @ t1 / (mu0 @ mu0)))
    con = phi_of_beta(p, phimap)
    con.name = "proportional-mean"
    return con
