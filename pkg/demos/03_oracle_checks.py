"""
Checking analytic results against independent oracles
=====================================================

Two oracles that share no code path with the analytic formulas:

* refit the estimator under (1 - eps) G + eps delta_y for a halving
  eps-ladder and Richardson-extrapolate the difference quotient;
* simulate samples, refit, and compare the covariance of
  sqrt(n) (theta_hat - theta_0) with V, using jackknife standard errors.
"""

import numpy as np

from mdivif import (
    TrueDistribution,
    dpd_kernel,
    if_finite_difference,
    influence_curve,
    make_model,
    mc_variance,
)
from mdivif.oracle import compare, compare_mc

model = make_model("normal")
theta0 = np.array([0.0, 1.0])
g = TrueDistribution.from_model(model, theta0)
kern = dpd_kernel(0.5)

# %%
ys = np.array([-3.0, -1.0, 0.5, 2.0, 4.0])
run = influence_curve(model, kern, g, None, ys)
for i, y in enumerate(ys):
    fd = if_finite_difference(model, kern, g, None, y, base=theta0)
    rep = compare(f"y={y:+.1f}", run.result.values[i], fd.value, 1e-3)
    print(f"{rep.check}: analytic {rep.analytic.round(6)}  oracle {rep.oracle.round(6)}  "
          f"rel err {rep.rel_discrepancy:.1e}  {'pass' if rep.passed else 'FAIL'}")

# %%
# 400 replicates keep this demo quick; the acceptance suite uses 2000.
mc = mc_variance(model, theta0, kern, n=200, reps=400, seed=1)
rep = compare_mc("dpd(0.5) covariance", run.result.V, mc)
print("\nanalytic V:\n", run.result.V.round(4))
print("Monte Carlo:\n", mc.cov.round(4))
print("jackknife SE:\n", mc.se.round(4))
print("max |z| =", round(rep.details["max_z"], 2), "->", "pass" if rep.passed else "FAIL")
