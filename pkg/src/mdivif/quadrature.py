"""
Integration engine for integrals against the dominating measure.

Three methods are available:

* adaptive Gauss-Kronrod (G7/K15) subdivision for one dimensional
  continuous supports; infinite tails are mapped onto [0, 1),
* tensor-product Gauss-Hermite rules for the isotropic multivariate normal,
* summation over {0, 1, 2, ...} with a geometric tail bound.

Integrands are vectorised: ``func(x)`` receives an array of nodes (shape
``(n,)`` or ``(n, d)``) and returns an array whose leading axis has length
``n``. Vector and matrix valued integrands are integrated entrywise under a
single shared subdivision.
"""

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .errors import QuadratureError
from .support import SupportDescriptor, SupportKind

__all__ = [
    "QuadratureSpec",
    "QuadResult",
    "integrate",
    "integrate_coupled",
    "expectation_under",
]

# QUADPACK qk15 abscissae and weights (non-negative half).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# full 15-point rule on [-1, 1]
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GW = np.zeros(15)
_GW[[1, 3, 5]] = _WG[:3]
_GW[7] = _WG[3]
_GW[[13, 11, 9]] = _WG[:3]

# initial breakpoints, in units of a window's scale
_BREAKS = np.array([-12.0, -8.0, -5.0, -3.0, -1.5, 0.0, 1.5, 3.0, 5.0, 8.0, 12.0])

_METHODS = ("adaptive", "gauss-hermite", "discrete")


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and method selection.

    ``method=None`` picks the method from the support: adaptive subdivision
    on one dimensional continuous supports, Gauss-Hermite on multivariate
    real supports, summation on the integers.
    """

    method: str = None
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_evals: int = 200_000
    tail_mass: float = 1e-12
    gh_nodes: int = None

    def __post_init__(self):
        if self.method is not None and self.method not in _METHODS:
            raise ValueError(f"unknown quadrature method {self.method!r}")
        if not (self.abs_tol > 0 and self.rel_tol > 0 and self.tail_mass > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_evals < 100:
            raise ValueError("max_evals must be at least 100")

    def with_overrides(self, **kw):
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


DEFAULT_SPEC = QuadratureSpec()


@dataclass
class QuadResult:
    value: np.ndarray
    error: np.ndarray
    n_evals: int


def _as_windows(windows, dim):
    out = []
    for loc, scale in windows or ():
        loc = np.atleast_1d(np.asarray(loc, dtype=float))
        if loc.size == 1 and dim > 1:
            loc = np.full(dim, loc[0])
        out.append((loc, float(scale)))
    if not out:
        out = [(np.zeros(dim), 1.0)]
    return out


def _check_finite(vals, x):
    bad = ~np.all(np.isfinite(vals.reshape(vals.shape[0], -1)), axis=1)
    if np.any(bad):
        where = np.asarray(x)[np.argmax(bad)]
        raise QuadratureError(f"non-finite integrand value at x={where}", x=where)


def _call(func, x):
    vals = np.asarray(func(x), dtype=float)
    if vals.shape[:1] != (len(x),):
        raise ValueError("integrand must return an array with leading axis len(x)")
    _check_finite(vals, x)
    return vals


# ---------------------------------------------------------------------------
# adaptive Gauss-Kronrod on the line / half line


def _map_nodes(lo, hi, kind, anchor, tscale):
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    t = mid[:, None] + half[:, None] * _NODES[None, :]
    x = np.where(kind[:, None] == 0, t, 0.0)
    jac = np.ones_like(t)
    tail = kind != 0
    if np.any(tail):
        tt = t[tail]
        off = tscale[tail, None] * tt / (1.0 - tt)
        x[tail] = anchor[tail, None] + kind[tail, None] * off
        jac[tail] = tscale[tail, None] / (1.0 - tt) ** 2
    return x, jac, half


def _eval_intervals(func, lo, hi, kind, anchor, tscale):
    x, jac, half = _map_nodes(lo, hi, kind, anchor, tscale)
    k = len(lo)
    vals = _call(func, x.ravel())
    shape = vals.shape[1:]
    vals = vals.reshape(k, 15, -1) * jac[:, :, None]
    kron = half[:, None] * np.einsum("j,kjm->km", _KW, vals)
    gauss = half[:, None] * np.einsum("j,kjm->km", _GW, vals)
    return kron, np.abs(kron - gauss), shape


def _initial_intervals(support, windows):
    pts = np.concatenate([loc[0] + scale * _BREAKS for loc, scale in windows])
    big = max(scale for _, scale in windows)
    if support.kind is SupportKind.POSITIVE_HALF_LINE:
        pts = np.concatenate([[0.0], pts[pts > 0]])
    pts = np.unique(pts)
    # drop breakpoints closer than 1e-3 of the smallest scale
    small = min(scale for _, scale in windows)
    keep = np.concatenate([[True], np.diff(pts) > 1e-3 * small])
    pts = pts[keep]
    lo = list(pts[:-1])
    hi = list(pts[1:])
    kind = [0] * len(lo)
    anchor = [0.0] * len(lo)
    tscale = [1.0] * len(lo)
    # right tail [pts[-1], inf)
    lo.append(0.0); hi.append(1.0); kind.append(1); anchor.append(pts[-1]); tscale.append(big)
    if support.kind is SupportKind.REAL_LINE:
        lo.append(0.0); hi.append(1.0); kind.append(-1); anchor.append(pts[0]); tscale.append(big)
    return (np.array(lo), np.array(hi), np.array(kind),
            np.array(anchor), np.array(tscale))


def _adaptive(func, support, spec, windows):
    lo, hi, kind, anchor, tscale = _initial_intervals(support, windows)
    kron, err, shape = _eval_intervals(func, lo, hi, kind, anchor, tscale)
    n_evals = 15 * len(lo)
    while True:
        total = kron.sum(axis=0)
        tot_err = err.sum(axis=0)
        tol = np.maximum(spec.abs_tol, spec.rel_tol * np.abs(total))
        if np.all(tot_err <= tol):
            break
        if n_evals >= spec.max_evals:
            raise QuadratureError(
                f"tolerance not met after {n_evals} evaluations "
                f"(error estimate {tot_err.max():.3g})")
        score = np.max(err / tol, axis=1)
        split = score >= 0.1 * score.max()
        # never bisect intervals that are already at roundoff width
        width_ok = (hi - lo) > 1e-13 * np.maximum(1.0, np.abs(hi + lo))
        split &= width_ok
        if not np.any(split):
            raise QuadratureError("subdivision exhausted before tolerance was met")
        mid = 0.5 * (lo[split] + hi[split])
        new_lo = np.concatenate([lo[split], mid])
        new_hi = np.concatenate([mid, hi[split]])
        new_kind = np.tile(kind[split], 2)
        new_anchor = np.tile(anchor[split], 2)
        new_tscale = np.tile(tscale[split], 2)
        k2, e2, _ = _eval_intervals(func, new_lo, new_hi, new_kind, new_anchor, new_tscale)
        n_evals += 15 * len(new_lo)
        keep = ~split
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        kind = np.concatenate([kind[keep], new_kind])
        anchor = np.concatenate([anchor[keep], new_anchor])
        tscale = np.concatenate([tscale[keep], new_tscale])
        kron = np.concatenate([kron[keep], k2])
        err = np.concatenate([err[keep], e2])
    return QuadResult(total.reshape(shape), tot_err.reshape(shape), n_evals)


# ---------------------------------------------------------------------------
# summation over the non-negative integers


def _discrete(func, spec, windows):
    start = 0
    stop = int(max(np.ceil(loc[0] + 12.0 * scale + 10.0) for loc, scale in windows))
    stop = max(stop, 32)
    total = None
    terms_tail = None
    n_evals = 0
    while True:
        x = np.arange(start, stop, dtype=float)
        vals = _call(func, x)
        shape = vals.shape[1:]
        vals = vals.reshape(len(x), -1)
        n_evals += len(x)
        block = vals.sum(axis=0)
        total = block if total is None else total + block
        absmax = np.abs(vals).max(axis=1)
        terms_tail = absmax if terms_tail is None else np.concatenate([terms_tail, absmax])[-64:]
        last = terms_tail[-8:]
        if last[-1] == 0.0 and np.all(last == 0.0):
            tail = 0.0
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = last[1:] / last[:-1]
            q = np.nanmax(ratios)
            tail = last[-1] * q / (1.0 - q) if q < 1.0 else np.inf
        if tail <= spec.tail_mass:
            break
        if n_evals >= spec.max_evals:
            raise QuadratureError(
                f"discrete tail bound {tail:.3g} not below {spec.tail_mass:g} "
                f"after {n_evals} terms")
        start, stop = stop, stop + max(stop - start, 32)
    err = np.full(total.shape, tail) + 1e-15 * np.abs(total) * np.sqrt(n_evals)
    return QuadResult(total.reshape(shape), err.reshape(shape), n_evals)


# ---------------------------------------------------------------------------
# tensor-product Gauss-Hermite


@lru_cache(maxsize=32)
def _gh_grid(m, d):
    t, w = np.polynomial.hermite.hermgauss(m)
    w = w * np.exp(t ** 2)
    grids = np.meshgrid(*([t] * d), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    wgrids = np.meshgrid(*([w] * d), indexing="ij")
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _default_gh_nodes(d):
    return {1: 64, 2: 36, 3: 24}.get(d, 14)


def _gh_rule(func, d, m, center, scale):
    t, w = _gh_grid(m, d)
    x = center[None, :] + np.sqrt(2.0) * scale * t
    if d == 1:
        x = x[:, 0]
    vals = _call(func, x)
    shape = vals.shape[1:]
    vals = vals.reshape(len(w), -1)
    factor = (np.sqrt(2.0) * scale) ** d
    return factor * (w @ vals), shape, len(w)


def _gauss_hermite(func, support, spec, windows):
    d = support.dim
    centers = np.array([loc for loc, _ in windows])
    center = 0.5 * (centers.min(axis=0) + centers.max(axis=0))
    spread = np.max(np.linalg.norm(centers - center, axis=1))
    scale = max(max(s for _, s in windows), 0.5 * spread)
    m = spec.gh_nodes or _default_gh_nodes(d)
    value, shape, n1 = _gh_rule(func, d, m, center, scale)
    coarse, _, n2 = _gh_rule(func, d, max(4, (2 * m) // 3), center, scale)
    err = np.abs(value - coarse)
    return QuadResult(value.reshape(shape), err.reshape(shape), n1 + n2)


# ---------------------------------------------------------------------------
# public entry points


def _resolve_method(support, spec):
    if spec.method is not None:
        return spec.method
    if support.is_discrete:
        return "discrete"
    if support.dim > 1:
        return "gauss-hermite"
    return "adaptive"


def integrate(func, support: SupportDescriptor, spec: QuadratureSpec = None, windows=None):
    """Integrate ``func`` against the dominating measure of ``support``.

    Parameters
    ----------
    func : callable
        Vectorised integrand ``x -> array(len(x), ...)``.
    support : SupportDescriptor
    spec : QuadratureSpec, optional
    windows : sequence of (loc, scale), optional
        Where the integrand's mass lives; used to standardise the initial
        partition (adaptive), the node placement (Gauss-Hermite) and the
        first summation block (discrete).

    Returns
    -------
    QuadResult
        ``value`` and entrywise ``error`` estimate with the integrand's
        trailing shape.

    Raises
    ------
    QuadratureError
        On a non-finite integrand value or when the tolerance is not met
        within ``spec.max_evals`` evaluations.
    """
    spec = spec or DEFAULT_SPEC
    windows = _as_windows(windows, support.dim)
    method = _resolve_method(support, spec)
    if method == "discrete":
        if not support.is_discrete:
            raise ValueError("discrete summation requires a discrete support")
        return _discrete(func, spec, windows)
    if support.is_discrete:
        raise ValueError(f"method {method!r} cannot integrate over a discrete support")
    if method == "gauss-hermite":
        if support.kind is not SupportKind.REAL_LINE:
            raise ValueError("Gauss-Hermite rules need a real-line support")
        return _gauss_hermite(func, support, spec, windows)
    if support.dim != 1:
        raise ValueError("adaptive subdivision is one dimensional only")
    return _adaptive(func, support, spec, windows)


def integrate_coupled(g, func, spec=None, windows=None, affine=False):
    """Integrate ``func(g(x), x)`` where ``g`` is a true distribution.

    ``g`` must expose ``support``, ``density(x)`` (pointwise density,
    including atoms on discrete supports), ``continuous_density(x)``,
    ``atoms`` (pairs of location and mass) and ``windows()``.

    On continuous supports point masses cannot enter a pointwise density;
    they are split out analytically, which is exact only when ``func`` is
    affine in its first argument (``affine=True``). The atom at ``y`` with
    mass ``w`` then contributes ``w * (func(1, y) - func(0, y))``.
    """
    from .errors import KernelInapplicableError

    support = g.support
    win = list(windows or ()) + list(g.windows())
    if support.is_discrete:
        res = integrate(lambda x: func(g.density(x), x), support, spec, win)
        return res.value, res
    res = integrate(lambda x: func(g.continuous_density(x), x), support, spec, win)
    value = res.value
    if g.atoms:
        if not affine:
            raise KernelInapplicableError(
                "integrand is not affine in the true density; point-mass "
                "contamination of a continuous distribution is undefined for it")
        locs = np.array([loc for loc, _ in g.atoms], dtype=float)
        masses = np.array([w for _, w in g.atoms], dtype=float)
        one = np.asarray(func(np.ones(len(locs)), locs), dtype=float)
        zero = np.asarray(func(np.zeros(len(locs)), locs), dtype=float)
        _check_finite(one - zero, locs)
        value = value + np.tensordot(masses, one - zero, axes=1)
    return value, res


def expectation_under(g, func, spec=None, windows=None):
    """Expectation of ``func(X)`` under the true distribution ``g``.

    Point masses of a contaminated continuous ``g`` are added exactly:
    ``(1 - eps) E_g[f] + eps f(y)``.
    """
    def integrand(a, x):
        vals = np.asarray(func(x), dtype=float)
        return a.reshape((-1,) + (1,) * (vals.ndim - 1)) * vals

    value, _ = integrate_coupled(g, integrand, spec, windows, affine=True)
    return value
