"""
Command-line front end.

    mdivif influence    --config run.cfg --out results/
    mdivif sweep        --config run.cfg --set "sweep.alpha=[0, 0.5, 1]"
    mdivif validate     --config run.cfg --threads 4
    mdivif fit          --config run.cfg --set data.path=sample.txt --set mode=data
    mdivif mc-variance  --config run.cfg --seed 7

Exit codes: 0 success, 2 config error, 3 computation error, 4 validation
failure. Every command writes its outputs atomically into ``--out`` and
echoes the fully resolved configuration in a JSON sidecar.
"""

import argparse
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import config as cfgmod
from .analysis import influence_curve
from .config import ConfigError
from .divergences import dpd_kernel, sdiv_kernel
from .errors import MdivifError
from .estimator import fit_mde, fit_mde_data, fit_rmde
from .influence import gross_error_sensitivity, zero_mean
from .models import TrueDistribution
from .objective import check_applicable
from .oracle import (
    ORACLE_SETTINGS,
    OracleReport,
    compare,
    compare_mc,
    if_finite_difference,
    mc_variance,
    probe_points,
)

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE, EXIT_VALIDATION = 0, 2, 3, 4

ZERO_MEAN_TOL = 1e-6
TANGENCY_TOL = 1e-8
FD_TOL = 1e-3
MC_K = 3.0


# ---------------------------------------------------------------------------
# output helpers


def _num(x):
    return "%.17g" % x


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if obj is None or isinstance(obj, (str, int, bool)):
        return obj
    return str(obj)


def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    _atomic_write(path, json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n")


def write_csv(path, header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(r) for r in rows)
    _atomic_write(path, "\n".join(lines) + "\n")


def _y_columns(grid):
    grid = np.asarray(grid)
    if grid.ndim == 1:
        return ["y"], [[_num(v)] for v in grid]
    d = grid.shape[1]
    return [f"y_{j + 1}" for j in range(d)], [[_num(v) for v in row] for row in grid]


def _echo(run):
    return cfgmod.full(run.values)


# ---------------------------------------------------------------------------
# commands


def _influence(run, kernel=None):
    return influence_curve(run.model, kernel or run.kernel, run.g, run.constraint, run.grid,
                           init=run.init, settings=run.settings,
                           solver=run.values["constraint.solver"])


def cmd_influence(run, out, threads=1):
    ir = _influence(run)
    res = ir.result
    ycols, yrows = _y_columns(res.grid)
    p = res.values.shape[1]
    header = ycols + [f"if_{j + 1}" for j in range(p)] + ["norm"]
    rows = [yr + [_num(v) for v in vals] + [_num(nv)]
            for yr, vals, nv in zip(yrows, res.values, res.norms)]
    write_csv(os.path.join(out, "influence.csv"), header, rows)
    gamma, verdict = gross_error_sensitivity(res)
    write_json(os.path.join(out, "influence.json"), {
        "config": _echo(run),
        "theta": ir.theta,
        "N": ir.comp.N,
        "xi": ir.comp.xi,
        "V": res.V,
        "gamma_star": gamma,
        "boundedness": verdict,
        "condition_number": res.condition_number,
        "solver": ir.solver,
        "rows": len(rows),
        "provenance": res.provenance,
    })
    return EXIT_OK


def _sweep_kernels(run):
    vals = run.values
    alphas = vals["sweep.alpha"]
    if not alphas:
        raise ConfigError("sweep needs at least one alpha", key="sweep.alpha")
    family = vals["sweep.family"]
    if family == "dpd":
        return [(a, 0.0, dpd_kernel(a)) for a in alphas]
    if family == "sdiv":
        lams = vals["sweep.lambda"]
        if not lams:
            raise ConfigError("sweep needs at least one lambda", key="sweep.lambda")
        return [(a, lam, sdiv_kernel((a, lam))) for a in alphas for lam in lams]
    raise ConfigError("sweep.family must be dpd or sdiv", key="sweep.family")


def cmd_sweep(run, out, threads=1):
    try:
        kernels = _sweep_kernels(run)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), key="sweep.alpha") from None
    rows, summary = [], []
    header = None
    for a, lam, kernel in kernels:
        ir = _influence(run, kernel)
        res = ir.result
        gamma, verdict = gross_error_sensitivity(res)
        ycols, yrows = _y_columns(res.grid)
        if header is None:
            header = ["alpha", "lambda"] + ycols + ["if_norm", "gamma_star"]
        rows.extend([_num(a), _num(lam)] + yr + [_num(nv), _num(gamma)]
                    for yr, nv in zip(yrows, res.norms))
        summary.append({"alpha": a, "lambda": lam, "kernel": kernel.name, "theta": ir.theta,
                        "gamma_star": gamma, "verdict": verdict["verdict"],
                        "edge_growth_low": verdict["edge_growth_low"],
                        "edge_growth_high": verdict["edge_growth_high"]})
    write_csv(os.path.join(out, "sweep.csv"), header, rows)
    write_json(os.path.join(out, "sweep.json"), {"config": _echo(run), "tuning": summary,
                                                 "rows": len(rows)})
    return EXIT_OK


def _isolated(check, fn):
    try:
        return fn()
    except (MdivifError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return OracleReport.failed(check, exc)


def _data_mode_guard(run):
    """Raise KernelInapplicableError when data-mode fits are impossible."""
    model = run.model
    sample = model.rvs(run.theta, 2, np.random.default_rng(run.seed))
    check_applicable(run.kernel, TrueDistribution.empirical(sample, model.support))


def cmd_validate(run, out, threads=1):
    vals = run.values
    reports = []
    base = {}

    def analysis():
        base["run"] = _influence(run)
        return None

    err = _isolated("influence", analysis)
    if err is not None:
        reports.append(err)

    def need_base(check):
        if "run" not in base:
            raise MdivifError(f"{check} skipped: the influence analysis failed")
        return base["run"]

    if vals["mode"] == "data":
        def data_mode():
            _data_mode_guard(run)
            return OracleReport("data-mode", passed=True, tolerance=0.0, mode="applicability",
                                details={"kernel": run.kernel.name})
        reports.append(_isolated("data-mode", data_mode))

    def zm():
        ir = need_base("zero-mean")
        value = zero_mean(ir.comp, ir.result, run.g)
        return compare("zero-mean", value, np.zeros_like(value), ZERO_MEAN_TOL, mode="absolute",
                       details={"g": repr(run.g)})
    reports.append(_isolated("zero-mean", zm))

    def tangency():
        ir = need_base("tangency")
        if ir.constraint.kind == "none":
            return OracleReport("tangency", passed=True, tolerance=TANGENCY_TOL, mode="relative",
                                details={"skipped": "no restriction"})
        Hm = ir.constraint.H(ir.theta)
        vals_ = ir.result.values
        ratio = np.linalg.norm(vals_ @ Hm, axis=1) / np.maximum(np.linalg.norm(vals_, axis=1),
                                                                1e-300)
        worst = float(ratio.max())
        return OracleReport("tangency", analytic=worst, oracle=0.0, abs_discrepancy=worst,
                            rel_discrepancy=worst, tolerance=TANGENCY_TOL, mode="relative",
                            passed=bool(worst <= TANGENCY_TOL),
                            details={"constraint": ir.constraint.name, "points": len(ratio)})
    reports.append(_isolated("tangency", tangency))

    if "run" in base:
        ir = base["run"]
        fd_constraint = ir.constraint if ir.constraint.kind != "none" else None
        for idx in probe_points(ir.result, run.g, run.kernel, vals["validate.probes"]):
            y = ir.result.grid[idx]
            label = f"fd-oracle y={np.array2string(np.asarray(y), precision=6)}"

            def fd(y=y, idx=idx, label=label):
                fdr = if_finite_difference(run.model, run.kernel, run.g, fd_constraint, y,
                                           init=ir.theta, settings=ORACLE_SETTINGS,
                                           threads=threads)
                return compare(label, ir.result.values[idx], fdr.value, FD_TOL,
                               details={"y": y, "ladder": fdr.ladder,
                                        "extrapolation_error": fdr.error})
            reports.append(_isolated(label, fd))
    else:
        reports.append(OracleReport.failed("fd-oracle", MdivifError("influence analysis failed")))

    if vals["validate.reps"] > 0:
        def mc():
            ir = need_base("mc-variance")
            if run.g.model_element() is None:
                raise MdivifError("the Monte Carlo check needs g to be a model element")
            con = ir.constraint if ir.constraint.kind != "none" else None
            res = mc_variance(run.model, run.theta, run.kernel, con, n=vals["validate.n"],
                              reps=vals["validate.reps"], seed=run.seed,
                              settings=run.settings, threads=threads)
            return compare_mc("mc-variance", ir.result.V, res, MC_K)
        reports.append(_isolated("mc-variance", mc))

    passed = all(r.passed for r in reports)
    write_json(os.path.join(out, "validate.json"), {
        "config": _echo(run),
        "passed": passed,
        "reports": [r.to_dict() for r in reports],
    })
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        extra = f" [{r.error_code}] {r.error}" if r.error else ""
        print(f"{status} {r.check}{extra}")
    return EXIT_OK if passed else EXIT_VALIDATION


def _load_data(path, model):
    try:
        data = np.loadtxt(path, delimiter=None if not _has_commas(path) else ",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read data: {exc}", key="data.path") from None
    if model.support.dim == 1:
        return data.reshape(-1)
    return data.reshape(-1, model.support.dim)


def _has_commas(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return "," in fh.read(4096)
    except OSError as exc:
        raise ConfigError(f"cannot read data: {exc}", key="data.path") from None


def cmd_fit(run, out, threads=1):
    vals = run.values
    restricted = run.constraint.kind != "none"
    if vals["mode"] == "data":
        if vals["data.path"] is None:
            raise ConfigError("data mode needs data.path", key="data.path")
        data = _load_data(vals["data.path"], run.model)
        if restricted:
            res = fit_rmde(run.model, run.kernel, data, run.constraint, run.init, run.settings)
        else:
            res = fit_mde_data(run.model, run.kernel, data, run.init, run.settings)
        extra = {"n": int(data.shape[0])}
    else:
        if restricted:
            res = fit_rmde(run.model, run.kernel, run.g, run.constraint, run.init, run.settings)
        else:
            res = fit_mde(run.model, run.kernel, run.g, run.init, run.settings)
        extra = {}
    write_json(os.path.join(out, "fit.json"), dict(res.as_dict(), config=_echo(run), **extra))
    print(" ".join(_num(t) for t in res.theta))
    return EXIT_OK


def cmd_mc_variance(run, out, threads=1):
    vals = run.values
    if run.g.model_element() is None:
        raise ConfigError("mc-variance simulates from the model; drop g.contamination",
                          key="g.contamination.eps")
    ir = _influence(run)
    con = ir.constraint if ir.constraint.kind != "none" else None
    mc = mc_variance(run.model, run.theta, run.kernel, con, n=vals["mc.n"], reps=vals["mc.reps"],
                     seed=run.seed, settings=run.settings, threads=threads)
    rep = compare_mc("mc-variance", ir.result.V, mc, MC_K)
    write_json(os.path.join(out, "mc_variance.json"), {
        "config": _echo(run),
        "V": ir.result.V,
        "mc": mc.to_dict(),
        "report": rep.to_dict(),
    })
    print(f"{'PASS' if rep.passed else 'FAIL'} mc-variance max_z={rep.details['max_z']:.3g}")
    return EXIT_OK


COMMANDS = {
    "influence": (cmd_influence, "influence function on a grid (CSV + JSON sidecar)"),
    "sweep": (cmd_sweep, "IF norms and gross-error sensitivity across tuning values"),
    "validate": (cmd_validate, "invariant and oracle checks for one configuration"),
    "fit": (cmd_fit, "minimum divergence estimate (functional or data mode)"),
    "mc-variance": (cmd_mc_variance, "Monte Carlo covariance against the analytic V"),
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value config file")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory")
    common.add_argument("--set", metavar="KEY=VALUE", action="append", default=[],
                        help="override one config entry (repeatable)")
    common.add_argument("--seed", type=int, help="override the seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads for oracles")
    parser = argparse.ArgumentParser(prog="mdivif", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=helptext)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.config:
            values = cfgmod.load(args.config, args.set)
        else:
            values = cfgmod.apply_overrides({}, args.set)
        if args.seed is not None:
            values["seed"] = args.seed
        if args.threads < 1:
            raise ConfigError("--threads must be positive")
        run = cfgmod.resolve(values, need_kernel=args.command != "sweep")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    handler = COMMANDS[args.command][0]
    try:
        return handler(run, args.out, threads=args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MdivifError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        code = getattr(exc, "code", type(exc).__name__)
        print(f"computation error [{code}] in {args.command}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
