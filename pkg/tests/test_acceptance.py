"""
Acceptance suite: one test per criterion, run at the stated tolerances.

Each test records its criterion number; ``conftest.py`` prints one
PASS/FAIL line per criterion at the end of the session.
"""

import time

import numpy as np
import pytest
from numpy.testing import assert_allclose

from mdivif.analysis import influence_curve
from mdivif.constraints import fixed_components, linear_constraint, proportional_mean
from mdivif.divergences import (
    disparity_kernel,
    dpd_kernel,
    kl_kernel,
    power_divergence_generator,
    sdiv_kernel,
)
from mdivif.estimator import fit_mde
from mdivif.influence import (
    RankDeficientSystem,
    components,
    default_grid,
    gross_error_sensitivity,
    if_fixed_components,
    if_rank_deficient,
    if_unrestricted,
    zero_mean,
)
from mdivif.models import TrueDistribution, make_model
from mdivif.oracle import ORACLE_SETTINGS, if_finite_difference, mc_variance, probe_points


def _criterion(record_property, n, title):
    record_property("criterion", n)
    record_property("title", title)


def _report(lines):
    for line in lines:
        print(line)


# ---------------------------------------------------------------------------
# 1


def test_c01_fisher_consistency(record_property):
    _criterion(record_property, 1, "Fisher consistency, 4 models x 3 kernels, < 30 s")
    cases = [
        ("normal", {}, [0.5, 2.0]),
        ("mvnormal_isotropic", {"dim": 2}, [0.5, -0.25, 1.5]),
        ("poisson", {}, [3.0]),
        ("exponential", {}, [0.7]),
    ]
    kernels = [kl_kernel(), dpd_kernel(0.5), sdiv_kernel(0.5, 0.5)]
    t0 = time.perf_counter()
    worst = 0.0
    for name, opts, theta0 in cases:
        m = make_model(name, **opts)
        g = TrueDistribution.from_model(m, theta0)
        init = np.asarray(theta0) * 1.3 + 0.1
        for k in kernels:
            est = fit_mde(m, k, g, init).theta
            err = np.abs(est - theta0).max()
            worst = max(worst, err)
            assert err <= 1e-6, (name, k.name, est)
    elapsed = time.perf_counter() - t0
    print(f"criterion 1: max |theta_hat - theta_0| = {worst:.2e}, {elapsed:.1f} s")
    assert elapsed < 30.0


# ---------------------------------------------------------------------------
# 2


def test_c02_disparity_if_at_model(record_property):
    _criterion(record_property, 2, "at-model disparity IF = y - mu; generators agree")
    m = make_model("normal", sigma2=1.0)
    mu = 0.5
    g = TrueDistribution.from_model(m, [mu])
    y = default_grid(m, np.array([mu]))
    assert y.shape == (201,)
    grids = []
    for lam in (-0.5, 0.0, 1.0):
        kern = disparity_kernel(power_divergence_generator(lam))
        run = influence_curve(m, kern, g, None, y, init=[mu])
        assert_allclose(run.result.values[:, 0], y - mu, rtol=0, atol=1e-6)
        grids.append(run.result.values[:, 0])
    for other in grids[1:]:
        assert_allclose(other, grids[0], rtol=0, atol=1e-8)


# ---------------------------------------------------------------------------
# 3


def test_c03_dpd_closed_form(record_property):
    _criterion(record_property, 3, "DPD at-model IF closed form, alpha in {0.25, 0.5, 1}")
    y = np.linspace(-10, 10, 201)
    loc = make_model("normal", sigma2=1.0)
    full = make_model("normal")
    for a in (0.25, 0.5, 1.0):
        exact = (1 + a) ** 1.5 * y * np.exp(-a * y ** 2 / 2)
        run = influence_curve(loc, dpd_kernel(a), TrueDistribution.from_model(loc, [0.0]),
                              None, y, init=[0.0])
        assert_allclose(run.result.values[:, 0], exact, rtol=0, atol=1e-6)
        # the location component of the two-parameter model is the same
        run = influence_curve(full, dpd_kernel(a), TrueDistribution.from_model(full, [0.0, 1.0]),
                              None, y, init=[0.0, 1.0])
        assert_allclose(run.result.values[:, 0], exact, rtol=0, atol=1e-6)


# ---------------------------------------------------------------------------
# 4 and 5: the oracle test matrix

MATRIX_MODELS = {
    "normal": (make_model("normal"), np.array([0.5, 2.0])),
    "mvnormal2": (make_model("mvnormal_isotropic", dim=2), np.array([0.5, -0.25, 1.5])),
    "poisson": (make_model("poisson"), np.array([3.0])),
    "exponential": (make_model("exponential"), np.array([0.7])),
}
MATRIX_KERNELS = {
    "kl": kl_kernel(),
    "dpd": {"normal": dpd_kernel(0.25), "mvnormal2": dpd_kernel(0.5),
            "poisson": dpd_kernel(0.5), "exponential": dpd_kernel(1.0)},
    "sdiv-": sdiv_kernel(0.5, -0.5),
    "sdiv+": sdiv_kernel(0.5, 0.5),
    "disparity": disparity_kernel(power_divergence_generator(-0.5)),
}
MATRIX_CONSTRAINTS = {
    "normal": {"fixed": fixed_components(2, [1], [1.5]),
               "linear": linear_constraint(np.array([[1.0], [1.0]]), [2.5])},
    "mvnormal2": {"fixed": fixed_components(3, [2], [1.2]),
                  "linear": linear_constraint(np.array([[1.0], [-1.0], [0.0]])),
                  "phi": proportional_mean([1.0, 2.0])},
    "poisson": {},
    "exponential": {},
}


# contamination point of the off-model true distribution
MATRIX_OUTLIER = {"normal": 5.0, "mvnormal2": [3.0, 2.0], "poisson": 9.0, "exponential": 4.0}


def _matrix_cells():
    """Applicable (model, kernel, constraint, g) cells.

    Kernels that are not affine in the true density cannot absorb point
    contamination on a continuous support, so their oracle cells exist on
    the Poisson model only. Restrictions need p >= 2. Every cell runs at
    the model and at a 5% contaminated g.
    """
    cells = []
    for mname, (model, theta0) in MATRIX_MODELS.items():
        for kname, kern in MATRIX_KERNELS.items():
            kern = kern[mname] if isinstance(kern, dict) else kern
            if not kern.affine and not model.support.is_discrete:
                continue
            cons = [("none", None)] + list(MATRIX_CONSTRAINTS[mname].items())
            for cname, con in cons:
                for gname in ("model", "contam"):
                    cells.append((mname, kname, cname, gname, model, theta0, kern, con))
    return cells


CELLS = _matrix_cells()


def _matrix_run(cell):
    mname, kname, cname, gname, model, theta0, kern, con = cell
    g = TrueDistribution.from_model(model, theta0)
    if gname == "contam":
        g = g.contaminate(MATRIX_OUTLIER[mname], 0.05)
    run = influence_curve(model, kern, g, con, default_grid(model, theta0), init=theta0,
                          settings=ORACLE_SETTINGS)
    return g, run


def test_c04_oracle_matrix(record_property):
    _criterion(record_property, 4, "analytic IF vs contamination oracle, full matrix, < 5 min")
    t0 = time.perf_counter()
    failures, lines = [], []
    n_points = 0
    for cell in CELLS:
        mname, kname, cname, gname = cell[:4]
        model, kern = cell[4], cell[6]
        g, run = _matrix_run(cell)
        fd_con = run.constraint if run.constraint.kind != "none" else None
        idx = probe_points(run.result, g, kern, 5)
        assert len(idx) == 5, cell[:4]
        worst = 0.0
        for i in idx:
            y = run.result.grid[i]
            fd = if_finite_difference(model, kern, g, fd_con, y, base=run.theta)
            exact = run.result.values[i]
            rel = np.linalg.norm(fd.value - exact) / np.linalg.norm(fd.value)
            worst = max(worst, rel)
            n_points += 1
            if not rel <= 1e-3:
                failures.append(cell[:4] + (y, rel))
        lines.append(f"  {mname:12s} {kname:10s} {cname:7s} {gname:7s} max rel err {worst:.2e}")
    elapsed = time.perf_counter() - t0
    _report(lines + [f"criterion 4: {len(CELLS)} cells, {n_points} probes, {elapsed:.1f} s"])
    assert not failures, failures
    assert elapsed < 300.0


def test_c05_constraint_tangency(record_property):
    _criterion(record_property, 5, "tangency |H^T IF| <= 1e-8 |IF| on every restricted run")
    worst = 0.0
    restricted = [c for c in CELLS if c[7] is not None]
    assert {c[2] for c in restricted} == {"fixed", "linear", "phi"}
    for cell in restricted:
        _, run = _matrix_run(cell)
        vals = run.result.values
        Hm = run.constraint.H(run.theta)
        lhs = np.linalg.norm(vals @ Hm, axis=1)
        rhs = 1e-8 * np.linalg.norm(vals, axis=1)
        assert np.all(lhs <= rhs), cell[:4]
        nz = np.linalg.norm(vals, axis=1) > 0
        worst = max(worst, float(np.max(lhs[nz] / np.linalg.norm(vals[nz], axis=1))))
    print(f"criterion 5: worst |H^T IF| / |IF| = {worst:.2e} over {len(restricted)} runs")


# ---------------------------------------------------------------------------
# 6


def _zero_mean_cases():
    n2 = make_model("normal")
    mv = make_model("mvnormal_isotropic", dim=2)
    mv3 = make_model("mvnormal_isotropic", dim=3)
    po = make_model("poisson")
    ex = make_model("exponential")
    lin = linear_constraint(np.array([[1.0], [-1.0], [0.0]]))
    hellinger = disparity_kernel(power_divergence_generator(-0.5))
    base = [
        ("normal dpd(0.5)", n2, dpd_kernel(0.5), [0.0, 1.0], 3.0, None),
        ("normal kl fixed", n2, kl_kernel(), [0.0, 1.0], 3.0, fixed_components(2, [1], [1.5])),
        ("mvnormal kl linear", mv, kl_kernel(), [0.0, 0.5, 1.0], [2.0, 1.0], lin),
        ("mvnormal dpd phi", mv3, dpd_kernel(0.5), [1.0, 1.0, 1.0, 1.0], [3.0, 1.0, 1.0],
         proportional_mean([1.0, 1.0, 1.0])),
        ("poisson hellinger", po, hellinger, [3.0], 7.0, None),
        ("exponential dpd(1)", ex, dpd_kernel(1.0), [0.7], 6.0, None),
    ]
    cases = []
    for label, model, kern, theta, yc, con in base:
        g = TrueDistribution.from_model(model, theta)
        cases.append(("at-model " + label, model, kern, g, con, theta))
        cases.append(("contaminated " + label, model, kern, g.contaminate(yc, 0.1), con, theta))
    return cases


def test_c06_zero_mean(record_property):
    _criterion(record_property, 6, "int IF dG = 0 (<= 1e-6), restricted and not, G = F or not")
    cases = _zero_mean_cases()
    assert sum(c[0].startswith("contaminated") for c in cases) == 6
    for label, model, kern, g, con, init in cases:
        y = np.zeros((1, model.support.dim)) if model.support.dim > 1 else np.zeros(1)
        run = influence_curve(model, kern, g, con, y, init=init)
        zm = np.linalg.norm(zero_mean(run.comp, run.result, g))
        print(f"  {label:38s} |int IF dG| = {zm:.2e}")
        assert zm <= 1e-6, label


# ---------------------------------------------------------------------------
# 7


def test_c07_fixed_component_exactness(record_property):
    _criterion(record_property, 7, "pinned IF block exactly 0; free block = submodel IF (1e-10)")
    cases = [
        (make_model("normal"), make_model("normal", sigma2=1.5), [0.3, 2.0], 1.5, 5.0),
        (make_model("mvnormal_isotropic", dim=2), make_model("mvnormal_isotropic", dim=2, sigma2=0.8),
         [0.3, -0.2, 1.0], 0.8, [3.0, -1.0]),
    ]
    for full, sub, theta0, s2, yc in cases:
        p = full.p
        g = TrueDistribution.from_model(full, theta0).contaminate(yc, 0.05)
        con = fixed_components(p, [p - 1], [s2])
        y = default_grid(full, np.asarray(theta0))
        run = influence_curve(full, dpd_kernel(0.5), g, con, y, init=theta0)
        assert np.all(run.result.values[:, p - 1] == 0.0)
        comp_sub = components(sub, dpd_kernel(0.5), g, run.theta[: p - 1])
        ref = if_unrestricted(comp_sub, y).values
        assert_allclose(run.result.values[:, : p - 1], ref, rtol=0, atol=1e-10)
        # same result from the dedicated solver
        direct = if_fixed_components(components(full, dpd_kernel(0.5), g, run.theta), [p - 1], y)
        assert_allclose(direct.values, run.result.values, rtol=0, atol=0)


# ---------------------------------------------------------------------------
# 8


@pytest.mark.parametrize("kernel", [kl_kernel(), dpd_kernel(0.5)], ids=["kl", "dpd0.5"])
def test_c08_proportional_mean_block_solver(record_property, kernel):
    _criterion(record_property, 8, "mu = beta mu0: IF(mu) = 0 (1e-10), IF(sigma2) vs oracle (1e-3)")
    m = make_model("mvnormal_isotropic", dim=3)
    theta0 = np.array([1.0, 1.0, 1.0, 1.5])
    g = TrueDistribution.from_model(m, theta0)
    con = proportional_mean(np.ones(3))
    y = default_grid(m, theta0)
    comp = components(m, kernel, g, theta0)
    res = if_rank_deficient(RankDeficientSystem.build(con, comp), comp, y)
    assert np.abs(res.values[:, :3]).max() <= 1e-10
    for i in probe_points(res, g, kernel, 5):
        fd = if_finite_difference(m, kernel, g, con, y[i], base=theta0)
        assert_allclose(res.values[i, 3], fd.value[3], rtol=1e-3)


# ---------------------------------------------------------------------------
# 9


def test_c09_restricted_mle_variance(record_property):
    _criterion(record_property, 9, "restricted MLE V vs Monte Carlo (n=200, 2000 reps), < 3 min")
    m = make_model("mvnormal_isotropic", dim=2)
    theta0 = np.array([0.0, 0.0, 1.0])
    g = TrueDistribution.from_model(m, theta0)
    con = linear_constraint(np.array([[1.0], [-1.0], [0.0]]))
    run = influence_curve(m, kl_kernel(), g, con, np.zeros((1, 2)), theta=theta0)
    V = run.result.V
    # sandwich value: restricted MLE of a common mean and the variance
    assert_allclose(V, [[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]], atol=1e-8)
    t0 = time.perf_counter()
    mc = mc_variance(m, theta0, kl_kernel(), con, n=200, reps=2000, seed=0)
    elapsed = time.perf_counter() - t0
    z = np.abs(mc.cov - V) / mc.se
    print(f"criterion 9: max z = {z.max():.2f}, failures {mc.failures}, {elapsed:.1f} s")
    assert np.all(z <= 3.0)
    assert elapsed < 180.0


# ---------------------------------------------------------------------------
# 10


def test_c10_sdiv_matches_dpd_at_model(record_property):
    _criterion(record_property, 10, "S-div IF = DPD IF at the model (1e-8)")
    m = make_model("normal")
    theta0 = [0.5, 2.0]
    g = TrueDistribution.from_model(m, theta0)
    y = default_grid(m, np.asarray(theta0))
    for a in (0.25, 0.5):
        ref = influence_curve(m, dpd_kernel(a), g, None, y, init=theta0).result.values
        for lam in (-0.5, 0.5, 1.0):
            got = influence_curve(m, sdiv_kernel(a, lam), g, None, y, init=theta0).result.values
            assert_allclose(got, ref, rtol=0, atol=1e-8)


# ---------------------------------------------------------------------------
# 11


def test_c11_boundedness_dichotomy(record_property):
    _criterion(record_property, 11, "gamma* finite and edges decay for alpha > 0; alpha = 0 flagged")
    m = make_model("normal", sigma2=1.0)
    g = TrueDistribution.from_model(m, [0.0])
    y = default_grid(m, np.array([0.0]))
    assert_allclose([y[0], y[-1]], [-10.0, 10.0])
    for a in (0.0, 0.25, 0.5, 1.0):
        res = influence_curve(m, dpd_kernel(a), g, None, y, init=[0.0]).result
        gamma, info = gross_error_sensitivity(res)
        if a == 0.0:
            assert info["verdict"] == "edge-growing"
        else:
            assert info["verdict"] == "bounded-on-probe-range"
            assert np.isfinite(gamma)
            assert_allclose(gamma, (1 + a) ** 1.5 / np.sqrt(a * np.e), rtol=1e-3)
            # each edge shrinks outward, or has already decayed to the
            # roundoff floor of the IF (alpha = 1 reaches it before y = 10)
            for growth, ratio in zip(res.edge_growth,
                                     (info["edge_ratio_low"], info["edge_ratio_high"])):
                assert growth < 0 or ratio <= 1e-12
