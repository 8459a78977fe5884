"""
Independent checks of the analytic results.

``if_finite_difference`` refits the estimator against (1 - eps) G +
eps delta_y on a halving eps-ladder and Richardson-extrapolates the
difference quotients to eps = 0. ``mc_variance`` simulates the sampling
distribution of sqrt(n)(theta_hat - theta_0) and attaches jackknife
standard errors to every covariance entry. ``OracleReport`` records one
comparison between an analytic value and its oracle.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConvergenceError, ExtrapolationError, KernelInapplicableError, MdivifError
from .estimator import FitSettings, contaminated_fit, fit_mde, fit_mde_data, fit_rmde
from .quadrature import QuadratureSpec

__all__ = [
    "OracleReport",
    "FDResult",
    "MCResult",
    "ORACLE_SETTINGS",
    "DEFAULT_LADDER",
    "if_finite_difference",
    "mc_variance",
    "compare",
    "compare_mc",
    "probe_points",
]

DEFAULT_LADDER = (1e-3, 5e-4, 2.5e-4)

#: tight solver and quadrature settings for contamination refits
ORACLE_SETTINGS = FitSettings(grad_tol=1e-11, multistart=1,
                              quad=QuadratureSpec(abs_tol=1e-13, rel_tol=1e-11))


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


@dataclass
class OracleReport:
    """Outcome of one analytic-versus-oracle comparison.

    ``passed`` is ``discrepancy <= tolerance`` where ``discrepancy`` is the
    relative or absolute discrepancy according to ``mode``. A check that
    could not be run carries ``error`` and fails.
    """

    check: str
    analytic: object = None
    oracle: object = None
    abs_discrepancy: float = float("nan")
    rel_discrepancy: float = float("nan")
    tolerance: float = float("nan")
    mode: str = "relative"
    passed: bool = False
    details: dict = field(default_factory=dict)
    error: str = None
    error_code: str = None

    def to_dict(self):
        return _jsonable(asdict(self))

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    @classmethod
    def failed(cls, check, exc, details=None):
        code = getattr(exc, "code", type(exc).__name__)
        return cls(check, error=str(exc), error_code=code, details=details or {})


def compare(check, analytic, oracle, tol, mode="relative", details=None):
    """Build an ``OracleReport`` from two arrays (norm-wise discrepancy)."""
    a = np.asarray(analytic, dtype=float)
    o = np.asarray(oracle, dtype=float)
    ad = float(np.linalg.norm(a - o))
    scale = float(np.linalg.norm(o))
    rd = ad / scale if scale > 0 else (0.0 if ad == 0 else float("inf"))
    disc = rd if mode == "relative" else ad
    return OracleReport(check, a, o, ad, rd, float(tol), mode, bool(disc <= tol),
                        dict(details or {}))


# ---------------------------------------------------------------------------
# contamination difference quotients


@dataclass
class FDResult:
    value: np.ndarray
    error: float
    quotients: np.ndarray
    extrapolants: np.ndarray
    ladder: tuple
    base: np.ndarray


def _base_fit(model, kernel, g, constraint, init, settings, route):
    if constraint is None or constraint.kind == "none":
        return fit_mde(model, kernel, g, init, settings).theta
    return fit_rmde(model, kernel, g, constraint, init, settings, route=route).theta


def if_finite_difference(model, kernel, g, constraint, y, ladder=DEFAULT_LADDER,
                         base=None, init=None, settings=None, route="auto", threads=1):
    """Contamination-refit estimate of IF(y).

    Parameters
    ----------
    model, kernel, g :
        As for ``fit_mde``; ``kernel`` must accept point-mass contamination
        of ``g`` (affine kernels, or any kernel on a discrete model).
    constraint : Constraint or None
    y : float or array_like
        Contamination point.
    ladder : sequence of three floats
        Halving contamination masses, largest first.
    base : array_like, optional
        theta at eps = 0. Fitted from ``init`` (or from ``g``'s own
        parameter) when omitted.
    threads : int
        Worker threads for the ladder refits.

    Returns
    -------
    FDResult
        ``value`` is the second-order Richardson extrapolant; ``error`` the
        norm of its difference from the last first-order extrapolant.

    Raises
    ------
    ExtrapolationError
        Ladder quotients whose successive differences fail to shrink.
    """
    settings = settings or ORACLE_SETTINGS
    ladder = tuple(float(e) for e in ladder)
    if len(ladder) != 3 or not all(np.isclose(ladder[k + 1], ladder[k] / 2) for k in range(2)):
        raise ValueError("the eps-ladder must hold three halving masses")
    if base is None:
        if init is None:
            elem = g.model_element()
            if elem is None:
                raise ValueError("pass base or init when g is not a model element")
            init = elem[1]
        base = _base_fit(model, kernel, g, constraint, init, settings, route)
    base = np.asarray(base, dtype=float)

    def refit(eps):
        return contaminated_fit(model, kernel, g, constraint, y, eps, base, settings,
                                route=route).theta

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            thetas = list(pool.map(refit, ladder))
    else:
        thetas = [refit(e) for e in ladder]
    q = np.array([(t - base) / e for t, e in zip(thetas, ladder)])
    d1 = np.linalg.norm(q[0] - q[1])
    d2 = np.linalg.norm(q[1] - q[2])
    noise = 1e-7 * (1.0 + np.linalg.norm(q[2]))
    if d2 > d1 + noise:
        raise ExtrapolationError(
            f"eps-ladder differences grow ({d1:.3g} then {d2:.3g}); the quotient is "
            f"not in its asymptotic regime")
    r1 = np.array([2 * q[1] - q[0], 2 * q[2] - q[1]])
    final = (4 * r1[1] - r1[0]) / 3
    err = float(np.linalg.norm(final - r1[1]))
    return FDResult(final, err, q, np.vstack([r1, final]), ladder, base)


def probe_points(result, g, kernel, k=5, min_norm=0.1, min_mass=1e-2):
    """Indices of up to ``k`` grid points suited to the refit oracle.

    For kernels that are not affine in the true density the contamination
    quotient is only asymptotic once eps << g(y), so points with g(y)
    below ``min_mass`` are skipped. Of the rest, points are spread evenly
    over those whose IF norm is at least ``min_norm`` times the largest,
    so relative errors are not dominated by near-zero IF values.
    """
    norms = result.norms
    ok = np.ones(len(norms), bool)
    if not kernel.affine and g.support.is_discrete:
        ok &= np.asarray(g.density(result.grid), dtype=float) >= min_mass
    top = norms[ok].max() if ok.any() else 0.0
    if top > 0:
        ok &= norms >= min_norm * top
    keep = np.flatnonzero(ok)
    if len(keep) <= k:
        return keep
    return keep[np.unique(np.round(np.linspace(0, len(keep) - 1, k)).astype(int))]


# ---------------------------------------------------------------------------
# Monte Carlo covariance


@dataclass
class MCResult:
    cov: np.ndarray
    se: np.ndarray
    reps: int
    failures: int
    mean: np.ndarray
    n: int
    seed: int

    def to_dict(self):
        return _jsonable(asdict(self))


def _jackknife_cov_se(d):
    """Leave-one-out standard errors of the entries of cov(d, ddof=1)."""
    R = d.shape[0]
    e = d - d.mean(axis=0)
    S = e.T @ e / (R - 1)
    outer = e[:, :, None] * e[:, None, :]
    loo = ((R - 1) * S[None] - (R / (R - 1)) * outer) / (R - 2)
    dev = loo - loo.mean(axis=0)
    se = np.sqrt((R - 1) / R * np.sum(dev ** 2, axis=0))
    return S, se


def mc_variance(model, theta0, kernel, constraint=None, n=200, reps=2000, seed=0,
                settings=None, threads=1, route="auto", max_failure_rate=0.01):
    """Empirical covariance of sqrt(n)(theta_hat - theta_0) over ``reps`` samples.

    Replicate k draws its sample from its own child of
    ``SeedSequence(seed)``, so results do not depend on ``threads``. Each
    fit starts at ``theta_0`` (one start).

    Returns
    -------
    MCResult
        ``cov`` (ddof=1) with entrywise jackknife standard errors ``se``.

    Raises
    ------
    ConvergenceError
        More than ``max_failure_rate`` of the replicate fits failed.
    KernelInapplicableError
        Non-affine kernel on a continuous model.
    """
    if n < 1 or reps < 3:
        raise ValueError("need n >= 1 and reps >= 3")
    theta0 = model.check(theta0)
    if not model.support.is_discrete and not kernel.affine:
        raise KernelInapplicableError(
            f"{kernel.name} cannot be fitted to samples from a continuous model "
            f"without smoothing; data mode needs an affine kernel")
    settings = (settings or FitSettings()).with_overrides(multistart=1)
    children = np.random.SeedSequence(seed).spawn(reps)
    restricted = constraint is not None and constraint.kind != "none"

    def one(k):
        rng = np.random.default_rng(children[k])
        data = model.rvs(theta0, n, rng)
        try:
            if restricted:
                return fit_rmde(model, kernel, data, constraint, theta0, settings,
                                route=route).theta
            return fit_mde_data(model, kernel, data, theta0, settings).theta
        except (MdivifError, ValueError, np.linalg.LinAlgError):
            return None

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fits = list(pool.map(one, range(reps)))
    else:
        fits = [one(k) for k in range(reps)]
    ok = [t for t in fits if t is not None]
    failures = reps - len(ok)
    if failures > max_failure_rate * reps:
        raise ConvergenceError(
            f"{failures} of {reps} Monte Carlo fits failed "
            f"(limit {max_failure_rate:.0%}); kernel {kernel.name}, n={n}")
    d = np.sqrt(n) * (np.array(ok) - theta0)
    S, se = _jackknife_cov_se(d)
    return MCResult(S, se, len(ok), failures, d.mean(axis=0), int(n), int(seed))


def compare_mc(check, V, mc, k=3.0, details=None):
    """Pass when every entry of ``V`` is within ``k`` jackknife SEs of the MC value."""
    V = np.asarray(V, dtype=float)
    z = np.abs(V - mc.cov) / np.where(mc.se > 0, mc.se, np.inf)
    zmax = float(np.max(np.where(np.abs(V - mc.cov) == 0, 0.0, z)))
    rep = compare(check, V, mc.cov, k, mode="absolute", details=details)
    rep.tolerance = float(k)
    rep.mode = "jackknife-se"
    rep.passed = bool(zmax <= k)
    rep.details = dict(rep.details, max_z=zmax, se=mc.se, reps=mc.reps,
                       failures=mc.failures, n=mc.n, seed=mc.seed)
    return rep
