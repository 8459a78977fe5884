"""
End-to-end influence analysis: fit T(G), build the IF pieces at the
fitted value and pick the solver that matches the restriction.
"""

from dataclasses import dataclass

import numpy as np

from .constraints import no_constraint
from .estimator import DEFAULT_SETTINGS, fit_mde, fit_rmde
from .influence import (
    RankDeficientSystem,
    components,
    if_fixed_components,
    if_rank_deficient,
    if_restricted,
    if_unrestricted,
    restricted_components,
)

__all__ = ["InfluenceRun", "influence_curve", "SOLVERS"]

#: how a phi-of-beta restriction is solved
SOLVERS = ("tangent", "block")


@dataclass
class InfluenceRun:
    """Fitted value, IF pieces and IF grid of one analysis.

    ``comp`` holds the pieces the solver consumed: restricted pieces for
    linear and tangent-space solves, unrestricted pieces otherwise.
    """

    theta: np.ndarray
    comp: object
    result: object
    constraint: object
    solver: str
    fit: object = None


def influence_curve(model, kernel, g, constraint, y_grid, theta=None, init=None,
                    settings=None, solver="tangent"):
    """Influence function of the (restricted) functional T at ``g`` on a grid.

    Parameters
    ----------
    model, kernel, g :
        Model family, divergence kernel and true distribution.
    constraint : Constraint or None
        ``None`` or an empty restriction gives the unrestricted IF.
    y_grid : array_like
        Contamination points.
    theta : array_like, optional
        T(G) when already known; fitted from ``init`` otherwise.
    init : array_like, optional
        Fit start; defaults to ``g``'s own parameter for model elements.
    solver : {"tangent", "block"}
        For phi-of-beta restrictions only. ``"tangent"`` replaces the
        restriction by its full-rank normal-space form and runs
        ``if_restricted``; ``"block"`` runs the partitioned solver
        ``if_rank_deficient``.

    Returns
    -------
    InfluenceRun
    """
    settings = settings or DEFAULT_SETTINGS
    if solver not in SOLVERS:
        raise ValueError(f"solver must be one of {SOLVERS}")
    constraint = constraint if constraint is not None else no_constraint(model.p)
    fit = None
    if theta is None:
        if init is None:
            elem = g.model_element()
            if elem is None:
                raise ValueError("pass theta or init when g is not a model element")
            init = elem[1]
        if constraint.kind == "none":
            fit = fit_mde(model, kernel, g, init, settings)
        else:
            fit = fit_rmde(model, kernel, g, constraint, init, settings)
        theta = fit.theta
    theta = model.check(theta)
    spec = settings.quad

    kind = constraint.kind
    if kind == "none":
        comp = components(model, kernel, g, theta, spec)
        res = if_unrestricted(comp, y_grid)
        used = "unrestricted"
    elif kind == "fixed":
        comp = components(model, kernel, g, theta, spec)
        res = if_fixed_components(comp, constraint.fixed_index, y_grid)
        used = "fixed"
    elif kind == "phi" and solver == "block":
        comp = components(model, kernel, g, theta, spec)
        res = if_rank_deficient(RankDeficientSystem.build(constraint, comp), comp, y_grid)
        used = "block"
    else:
        if kind == "phi":
            constraint = constraint.reduced()
        comp = restricted_components(model, kernel, g, constraint, theta, spec)
        res = if_restricted(comp, constraint, y_grid)
        used = "tangent"
    res.provenance = dict(res.provenance, solver=used)
    return InfluenceRun(theta, comp, res, constraint, used, fit)
