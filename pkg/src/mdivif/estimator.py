"""
Minimum divergence estimation, unrestricted and restricted.

The objective theta -> rho(g, f_theta) is smooth and its exact Hessian is
available from the same quadrature as the gradient, so the inner solver is
a damped Newton method with a positive-definite shift and Armijo
backtracking. Restricted fits either minimize over the free coordinates of
a parametrization theta = psi(nu) or run an augmented Lagrangian loop on
h(theta) = 0 followed by a Newton polish of the KKT system.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .constraints import no_constraint
from .errors import (
    ConstraintError,
    ConvergenceError,
    InvalidParameterError,
    MdivifError,
    RankDeficiencyError,
)
from .models import TrueDistribution
from .objective import check_applicable, divergence_terms
from .quadrature import QuadratureSpec

__all__ = [
    "FitSettings",
    "FitResult",
    "fit_mde",
    "fit_mde_data",
    "fit_rmde",
    "contaminated_fit",
]


@dataclass(frozen=True)
class FitSettings:
    """Solver settings.

    Parameters
    ----------
    grad_tol : float
        Convergence threshold on the (projected) gradient norm.
    max_iter : int
        Newton iterations per start.
    multistart : int
        Number of starts; the first is ``init`` itself, the others are
        seeded perturbations of it. The lowest objective value wins.
    alm_penalty0 : float
        Initial penalty of the augmented Lagrangian route.
    constraint_tol : float
        Required ``||h(theta)||`` at a restricted solution.
    quad : QuadratureSpec, optional
    seed : int
        Seed of the multistart perturbations.
    """

    grad_tol: float = 1e-9
    max_iter: int = 100
    multistart: int = 5
    alm_penalty0: float = 10.0
    constraint_tol: float = 1e-10
    quad: QuadratureSpec = None
    seed: int = 0

    def with_overrides(self, **kw):
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


DEFAULT_SETTINGS = FitSettings()


@dataclass
class FitResult:
    theta: np.ndarray
    value: float
    grad_norm: float
    constraint_violation: float = 0.0
    iterations: int = 0
    step_sizes: list = field(default_factory=list)
    converged: bool = True
    route: str = "unrestricted"
    #: estimating-equation residual int grad D(g, f_theta) at the solution
    residual: np.ndarray = None
    starts: int = 1

    def as_dict(self):
        return {
            "theta": self.theta.tolist(),
            "value": self.value,
            "grad_norm": self.grad_norm,
            "constraint_violation": self.constraint_violation,
            "iterations": self.iterations,
            "converged": self.converged,
            "route": self.route,
            "starts": self.starts,
        }


# ---------------------------------------------------------------------------
# damped Newton


def _pd_solve(Hm, g):
    w, V = np.linalg.eigh(0.5 * (Hm + Hm.T))
    floor = 1e-10 * max(1.0, np.abs(w).max())
    w = np.maximum(np.abs(w), floor)
    return -V @ ((V.T @ g) / w)


def _newton(fgh, x0, settings, project=None):
    """Minimize with exact Hessians.

    ``fgh(x)`` returns (value, grad, hess) or raises InvalidParameterError
    when x leaves the valid region. ``project`` maps a gradient to the norm
    used in the stopping rule (identity by default).
    """
    x = np.asarray(x0, dtype=float).copy()
    f, g, Hm = fgh(x)
    steps = []
    gnorm = np.linalg.norm(g)
    it = 0
    for it in range(1, settings.max_iter + 1):
        if gnorm <= settings.grad_tol:
            it -= 1
            break
        d = _pd_solve(Hm, g)
        slope = g @ d
        t = 1.0
        accepted = False
        while t > 1e-12:
            xn = x + t * d
            try:
                fn, gn, Hn = fgh(xn)
            except (InvalidParameterError, FloatingPointError):
                t *= 0.5
                continue
            except MdivifError as exc:
                if exc.code in ("quadrature-failure",):
                    t *= 0.5
                    continue
                raise
            if fn <= f + 1e-4 * t * slope:
                accepted = True
            elif (abs(fn - f) <= 1e-13 * max(1.0, abs(f))
                  and np.linalg.norm(gn) < gnorm):
                # objective flat to roundoff: judge by the gradient instead
                accepted = True
            if accepted:
                break
            t *= 0.5
        if not accepted:
            break
        steps.append(t)
        x, f, g, Hm = xn, fn, gn, Hn
        gnorm = np.linalg.norm(g)
    return x, f, g, Hm, it, steps, gnorm <= settings.grad_tol


def _perturbed_starts(x0, positive, k, seed, scale=0.25):
    x0 = np.asarray(x0, dtype=float)
    starts = [x0.copy()]
    if k <= 1:
        return starts
    rng = np.random.default_rng(seed)
    pos = np.zeros(x0.size, dtype=bool)
    pos[list(positive)] = True
    for _ in range(k - 1):
        z = rng.standard_normal(x0.size) * scale
        x = np.where(pos, x0 * np.exp(z), x0 + z * (1.0 + np.abs(x0)))
        starts.append(x)
    return starts


def _best_of(runs):
    ok = [r for r in runs if r is not None]
    if not ok:
        return None
    conv = [r for r in ok if r.converged]
    pool = conv or ok
    return min(pool, key=lambda r: r.value)


def _as_g(model, g_or_data):
    if isinstance(g_or_data, TrueDistribution):
        return g_or_data
    return _empirical(model, g_or_data)


def _empirical(model, data):
    data = np.asarray(data, dtype=float)
    if data.size == 0:
        raise ValueError("empty data")
    if not np.all(model.support.contains(data)):
        raise ValueError("data contain points outside the model's support")
    return TrueDistribution.empirical(data, model.support)


# ---------------------------------------------------------------------------
# unrestricted


def fit_mde(model, kernel, g, init, settings=None):
    """Minimum divergence estimate T(G) = argmin_theta rho(g, f_theta).

    Parameters
    ----------
    model : ParametricModel
    kernel : DivergenceKernel
    g : TrueDistribution
        Known, contaminated or empirical true distribution.
    init : array_like
        Starting value inside the parameter region.
    settings : FitSettings, optional

    Returns
    -------
    FitResult
        ``residual`` holds the estimating-equation value at the solution.

    Raises
    ------
    KernelInapplicableError
        Non-affine kernel against point masses on a continuous support.
    ConvergenceError
        No start reached the gradient tolerance.
    """
    settings = settings or DEFAULT_SETTINGS
    check_applicable(kernel, g)
    init = model.check(init)

    def fgh(theta):
        terms = divergence_terms(model, kernel, g, model.check(theta), settings.quad)
        return terms.value, terms.grad, terms.hess

    runs = []
    for k, x0 in enumerate(_perturbed_starts(init, model.positive, settings.multistart, settings.seed)):
        try:
            x0 = model.check(x0)
            x, f, gr, _, it, steps, conv = _newton(fgh, x0, settings)
        except MdivifError:
            if k == 0 and settings.multistart <= 1:
                raise
            continue
        runs.append(FitResult(x, f, float(np.linalg.norm(gr)), 0.0, it, steps, conv,
                              residual=gr, starts=settings.multistart))
    best = _best_of(runs)
    if best is None or not best.converged:
        raise ConvergenceError(
            f"{kernel.name} fit of {model.name} did not reach gradient norm "
            f"{settings.grad_tol:g}" + (f" (best {best.grad_norm:.3g})" if best else ""),
            result=best)
    return best


def fit_mde_data(model, kernel, data, init, settings=None):
    """Minimum divergence estimate from a sample.

    The true density is replaced by the empirical distribution. For kernels
    affine in the true density (DPD, likelihood, S-divergence with A = 1)
    the theta-free term is dropped; the DPD objective is then

        int f^(1+alpha) - (1 + alpha)/alpha * mean(f^alpha(X_i)).

    Disparities need a density estimate and are available on discrete
    models only, where the empirical pmf serves.
    """
    return fit_mde(model, kernel, _empirical(model, data), init, settings)


# ---------------------------------------------------------------------------
# restricted


def _fit_param(model, kernel, g, constraint, init, settings):
    def theta_of(nu):
        return model.check(constraint.psi(nu))

    def fgh(nu):
        theta = theta_of(nu)
        t = divergence_terms(model, kernel, g, theta, settings.quad)
        P = constraint.psi_jac(nu)
        gn = P.T @ t.grad
        Hn = P.T @ t.hess @ P + np.einsum("i,ijk->jk", t.grad, constraint.psi_hess(nu))
        return t.value, gn, Hn

    nu0 = constraint.nu_of(np.asarray(init, dtype=float))
    positive = _positive_nu(model, constraint, nu0)
    runs = []
    for k, x0 in enumerate(_perturbed_starts(nu0, positive, settings.multistart, settings.seed)):
        try:
            nu, f, gn, _, it, steps, conv = _newton(fgh, x0, settings)
        except MdivifError:
            if k == 0 and settings.multistart <= 1:
                raise
            continue
        theta = constraint.psi(nu)
        runs.append(FitResult(theta, f, float(np.linalg.norm(gn)),
                              constraint.violation(theta), it, steps, conv,
                              route="param", starts=settings.multistart))
    return _best_of(runs)


def _positive_nu(model, constraint, nu0):
    # free coordinates that map one-to-one onto positive model parameters
    P = constraint.psi_jac(nu0)
    out = []
    for k in model.positive:
        cols = np.flatnonzero(np.abs(P[k]) > 0)
        if cols.size == 1 and np.count_nonzero(np.abs(P[:, cols[0]]) > 0) == 1:
            out.append(int(cols[0]))
    return tuple(out)


def _fit_alm(model, kernel, g, constraint, init, settings):
    """Augmented Lagrangian on h(theta) = 0 with a KKT Newton polish."""
    if constraint.declared_rank < constraint.r:
        raise ConstraintError("augmented Lagrangian route needs a full-rank H; use reduced()")
    r = constraint.r
    lam = np.zeros(r)
    c = settings.alm_penalty0
    theta = model.check(init)
    inner = settings.with_overrides(grad_tol=max(settings.grad_tol, 1e-7))
    iters = 0
    steps = []

    for _outer in range(30):
        def fgh(th, lam=lam, c=c):
            th = model.check(th)
            t = divergence_terms(model, kernel, g, th, settings.quad)
            hv = constraint.h(th)
            Hm = constraint.H(th)
            w = lam + c * hv
            return (t.value + lam @ hv + 0.5 * c * hv @ hv,
                    t.grad + Hm @ w,
                    t.hess + c * Hm @ Hm.T)

        theta, _, _, _, it, st, _ = _newton(fgh, theta, inner)
        iters += it
        steps += st
        hv = constraint.h(theta)
        lam = lam + c * hv
        if np.linalg.norm(hv) <= 1e-6:
            break
        c *= 10.0

    # KKT polish: Newton on grad rho + H lam = 0, h = 0
    p = model.p
    for _ in range(20):
        t = divergence_terms(model, kernel, g, theta, settings.quad)
        Hm = constraint.H(theta)
        hv = constraint.h(theta)
        lam = np.linalg.lstsq(Hm, -t.grad, rcond=None)[0]
        res = np.concatenate([t.grad + Hm @ lam, hv])
        if (np.linalg.norm(res[:p]) <= settings.grad_tol
                and np.linalg.norm(hv) <= settings.constraint_tol):
            break
        K = np.block([[t.hess, Hm], [Hm.T, np.zeros((r, r))]])
        delta = np.linalg.lstsq(K, -res, rcond=None)[0]
        theta = model.check(theta + delta[:p])
        iters += 1
        steps.append(1.0)

    t = divergence_terms(model, kernel, g, theta, settings.quad)
    Hm = constraint.H(theta)
    proj = _project_out(Hm, t.grad)
    gnorm = float(np.linalg.norm(proj))
    viol = constraint.violation(theta)
    conv = gnorm <= settings.grad_tol and viol <= settings.constraint_tol
    return FitResult(theta, t.value, gnorm, viol, iters, steps, conv, route="alm",
                     residual=t.grad)


def _project_out(Hm, v):
    """Component of ``v`` orthogonal to range(H)."""
    if Hm.shape[1] == 0:
        return v
    coef = np.linalg.lstsq(Hm, v, rcond=None)[0]
    return v - Hm @ coef


def fit_rmde(model, kernel, g_or_data, constraint, init, settings=None, route="auto"):
    """Restricted minimum divergence estimate over {theta : h(theta) = 0}.

    Parameters
    ----------
    g_or_data : TrueDistribution or array_like
        True distribution (functional mode) or a sample (data mode).
    constraint : Constraint
    init : array_like
        Starting value; it need not satisfy the restriction.
    route : {"auto", "param", "alm"}
        ``"param"`` minimizes over the free coordinates of the constraint's
        parametrization; ``"alm"`` runs an augmented Lagrangian on h. The
        default uses the parametrization when there is one.

    Returns
    -------
    FitResult
        ``grad_norm`` is the norm of the gradient projected onto the
        tangent space of the restricted set.
    """
    settings = settings or DEFAULT_SETTINGS
    g = _as_g(model, g_or_data)
    check_applicable(kernel, g)
    if constraint is None:
        constraint = no_constraint(model.p)
    if constraint.p != model.p:
        raise ConstraintError(f"constraint is for p={constraint.p}, model has p={model.p}")
    if route == "auto":
        route = "param" if constraint.has_psi else "alm"
    if route == "param":
        best = _fit_param(model, kernel, g, constraint, init, settings)
    elif route == "alm":
        alm_con = constraint if constraint.declared_rank == constraint.r else constraint.reduced()
        best = _fit_alm(model, kernel, g, alm_con, init, settings)
    else:
        raise ValueError(f"unknown route {route!r}")
    if best is None or not best.converged or best.constraint_violation > settings.constraint_tol:
        raise ConvergenceError(
            f"restricted {kernel.name} fit via {route} route did not converge"
            + (f" (grad {best.grad_norm:.3g}, |h| {best.constraint_violation:.3g})" if best else ""),
            result=best)
    if constraint.declared_rank == constraint.r and constraint.r:
        rank = constraint.numerical_rank(best.theta)
        if rank != constraint.r:
            raise RankDeficiencyError(
                f"H has numerical rank {rank} < r={constraint.r} at the solution")
    t = divergence_terms(model, kernel, g, best.theta, settings.quad, order=1)
    best.residual = t.grad
    return best


def contaminated_fit(model, kernel, g, constraint, y, eps, warm_start, settings=None,
                     route="auto"):
    """Fit against g_eps = (1 - eps) g + eps delta_y, starting at ``warm_start``.

    No multistart: the warm start keeps the solution on the branch of the
    uncontaminated fit.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("contamination mass must lie in (0, 1)")
    settings = (settings or DEFAULT_SETTINGS).with_overrides(multistart=1)
    g_eps = g.contaminate(y, eps)
    if constraint is None or constraint.kind == "none":
        return fit_mde(model, kernel, g_eps, warm_start, settings)
    return fit_rmde(model, kernel, g_eps, constraint, warm_start, settings, route=route)
