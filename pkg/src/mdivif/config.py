"""
Run configuration: a flat ``key = value`` text format.

Grammar, one entry per line::

    # comment
    key = value

Values are JSON literals where they parse as JSON (numbers, ``true`` /
``false``, ``[1, 2]``, ``[[1], [-1], [0]]``) and bare strings otherwise
(``dpd(0.5)``, ``normal``). Unknown keys, duplicate keys and values of the
wrong type are errors that name the line and key. ``--set key=value`` on
the command line overrides file entries with the same grammar.
"""

import json
from dataclasses import dataclass

import numpy as np

from .constraints import fixed_components, linear_constraint, no_constraint, proportional_mean
from .divergences import parse_kernel
from .estimator import FitSettings
from .models import TrueDistribution, make_model
from .quadrature import QuadratureSpec

__all__ = ["ConfigError", "SCHEMA", "parse_text", "load", "RunConfig", "resolve"]


class ConfigError(ValueError):
    code = "config-error"

    def __init__(self, message, line=None, key=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.key = key


# key -> (type, default, help)
SCHEMA = {
    "model": ("str", None, "normal | mvnormal_isotropic | poisson | exponential"),
    "model.dim": ("int", 2, "observation dimension of mvnormal_isotropic"),
    "model.sigma2": ("float", None, "known variance; drops sigma2 from theta"),
    "theta": ("vector", None, "parameter of the model element g (theta_0)"),
    "init": ("vector", None, "starting value of the fit of T(G); defaults to theta"),
    "kernel": ("str", None, "kl | dpd(alpha) | sdiv(alpha, lambda) | disparity(power, lambda)"),
    "g.contamination.y": ("vector", None, "point mass location of a contaminated g"),
    "g.contamination.eps": ("float", 0.0, "point mass weight of a contaminated g"),
    "constraint": ("str", "none", "none | fixed | linear | phi"),
    "constraint.index": ("intlist", None, "pinned coordinates (fixed)"),
    "constraint.values": ("vector", None, "pinned values (fixed)"),
    "constraint.H": ("matrix", None, "p x r matrix of H^T theta = c (linear)"),
    "constraint.c": ("vector", None, "right-hand side c (linear)"),
    "constraint.mu0": ("vector", None, "direction of mu = beta mu0 (phi)"),
    "constraint.solver": ("str", "tangent", "phi only: tangent | block"),
    "grid.points": ("int", 201, "number of contamination points"),
    "grid.width": ("float", 10.0, "half width in scale units"),
    "grid.values": ("matrix", None, "explicit contamination points"),
    "sweep.family": ("str", "dpd", "dpd | sdiv"),
    "sweep.alpha": ("vector", None, "alpha values"),
    "sweep.lambda": ("vector", [0.0], "lambda values (sdiv)"),
    "validate.probes": ("int", 5, "probe points of the refit oracle"),
    "validate.reps": ("int", 0, "Monte Carlo replicates (0 skips the check)"),
    "validate.n": ("int", 200, "Monte Carlo sample size"),
    "mc.n": ("int", 200, "Monte Carlo sample size"),
    "mc.reps": ("int", 2000, "Monte Carlo replicates"),
    "mode": ("str", "functional", "functional | data"),
    "data.path": ("str", None, "observations, one per line (rows for multivariate)"),
    "seed": ("int", 0, "seed of sampling and multistart"),
    "quad.abs_tol": ("float", 1e-10, ""),
    "quad.rel_tol": ("float", 1e-8, ""),
    "quad.tail_mass": ("float", 1e-12, ""),
    "quad.max_evals": ("int", 200_000, ""),
    "opt.grad_tol": ("float", 1e-9, ""),
    "opt.max_iter": ("int", 100, ""),
    "opt.multistart": ("int", 5, ""),
    "opt.alm_penalty0": ("float", 10.0, ""),
}


def _coerce(key, raw, line=None):
    if key not in SCHEMA:
        raise ConfigError("unknown key", line, key)
    kind = SCHEMA[key][0]
    text = raw.strip()
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    try:
        if kind == "str":
            if not isinstance(value, str):
                value = text
            return value
        if kind == "int":
            if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
                raise TypeError
            return int(value)
        if kind == "float":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError
            return float(value)
        if kind == "bool":
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind == "vector":
            arr = np.atleast_1d(np.asarray(value, dtype=float))
            if arr.ndim != 1:
                raise TypeError
            return arr.tolist()
        if kind == "intlist":
            arr = np.atleast_1d(np.asarray(value))
            if arr.ndim != 1 or not np.all(arr == np.round(arr)):
                raise TypeError
            return [int(v) for v in arr]
        if kind == "matrix":
            arr = np.asarray(value, dtype=float)
            if arr.ndim == 1:
                arr = arr[:, None]
            if arr.ndim != 2:
                raise TypeError
            return arr.tolist()
    except (TypeError, ValueError):
        raise ConfigError(f"expected {kind}, got {text!r}", line, key) from None
    raise ConfigError(f"unsupported type {kind}", line, key)


def parse_text(text):
    """Parse config text into a dict of typed values."""
    out = {}
    for n, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError("expected 'key = value'", n)
        key, raw = body.split("=", 1)
        key = key.strip()
        if key in out:
            raise ConfigError("duplicate key", n, key)
        out[key] = _coerce(key, raw, n)
    return out


def apply_overrides(cfg, overrides):
    cfg = dict(cfg)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        cfg[key.strip()] = _coerce(key.strip(), raw)
    return cfg


def load(path, overrides=()):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return apply_overrides(parse_text(text), overrides)


def full(cfg):
    """``cfg`` with every schema default filled in (the resolved config)."""
    out = {k: v[1] for k, v in SCHEMA.items()}
    out.update(cfg)
    return out


@dataclass
class RunConfig:
    model: object
    theta: np.ndarray
    init: np.ndarray
    kernel: object
    kernel_text: str
    g: object
    constraint: object
    settings: FitSettings
    quad: QuadratureSpec
    grid: np.ndarray
    seed: int
    values: dict


def _require(cfg, key):
    if cfg.get(key) is None:
        raise ConfigError("missing required key", key=key)
    return cfg[key]


def build_constraint(cfg, p):
    kind = cfg["constraint"]
    if kind == "none":
        return no_constraint(p)
    if kind == "fixed":
        idx = _require(cfg, "constraint.index")
        vals = _require(cfg, "constraint.values")
        return fixed_components(p, idx, vals)
    if kind == "linear":
        Hm = np.asarray(_require(cfg, "constraint.H"), dtype=float)
        if Hm.shape[0] != p:
            raise ConfigError(f"H must have {p} rows", key="constraint.H")
        return linear_constraint(Hm, cfg.get("constraint.c"))
    if kind == "phi":
        mu0 = _require(cfg, "constraint.mu0")
        return proportional_mean(mu0, p)
    raise ConfigError(f"unknown constraint {kind!r}", key="constraint")


def build_grid(cfg, model, theta):
    from .influence import default_grid

    if cfg.get("grid.values") is not None:
        pts = np.asarray(cfg["grid.values"], dtype=float)
        if model.support.dim == 1:
            pts = pts.reshape(-1)
        elif pts.shape[1] != model.support.dim:
            pts = pts.reshape(-1, model.support.dim)
        if pts.size == 0:
            raise ConfigError("empty contamination grid", key="grid.values")
        return pts
    if cfg["grid.points"] < 1:
        raise ConfigError("grid must hold at least one point", key="grid.points")
    return default_grid(model, theta, n=cfg["grid.points"], width=cfg["grid.width"])


def resolve(cfg, need_kernel=True):
    """Turn a parsed config into model, kernel, g, constraint and settings."""
    cfg = full(cfg)
    name = _require(cfg, "model")
    opts = {}
    if name == "mvnormal_isotropic":
        opts["dim"] = cfg["model.dim"]
    if cfg["model.sigma2"] is not None:
        if name not in ("normal", "mvnormal_isotropic"):
            raise ConfigError("known variance applies to normal models only", key="model.sigma2")
        opts["sigma2"] = cfg["model.sigma2"]
    try:
        model = make_model(name, **opts)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), key="model") from None
    theta = np.asarray(_require(cfg, "theta"), dtype=float)
    try:
        theta = model.check(theta)
    except ValueError as exc:
        raise ConfigError(str(exc), key="theta") from None
    init = theta if cfg["init"] is None else np.asarray(cfg["init"], dtype=float)
    kernel = None
    if need_kernel or cfg["kernel"] is not None:
        try:
            kernel = parse_kernel(_require(cfg, "kernel"))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc), key="kernel") from None
    if cfg["constraint.solver"] not in ("tangent", "block"):
        raise ConfigError("solver must be tangent or block", key="constraint.solver")
    try:
        g = TrueDistribution.from_model(model, theta)
        eps = cfg["g.contamination.eps"]
        if eps:
            y = _require(cfg, "g.contamination.y")
            g = g.contaminate(y[0] if model.support.dim == 1 else y, eps)
        constraint = build_constraint(cfg, model.p)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg["mode"] not in ("functional", "data"):
        raise ConfigError("mode must be functional or data", key="mode")
    try:
        quad = QuadratureSpec(abs_tol=cfg["quad.abs_tol"], rel_tol=cfg["quad.rel_tol"],
                              tail_mass=cfg["quad.tail_mass"], max_evals=cfg["quad.max_evals"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    settings = FitSettings(grad_tol=cfg["opt.grad_tol"], max_iter=cfg["opt.max_iter"],
                           multistart=cfg["opt.multistart"], alm_penalty0=cfg["opt.alm_penalty0"],
                           quad=quad, seed=cfg["seed"])
    grid = build_grid(cfg, model, theta)
    return RunConfig(model, theta, init, kernel, cfg["kernel"], g, constraint, settings, quad,
                     grid, cfg["seed"], cfg)
