"""
The command-line front end
==========================

Each subcommand reads a ``key = value`` config (see ``configs/``),
accepts ``--set key=value`` overrides and writes CSV/JSON into ``--out``.
This script drives it in-process; the shell equivalent is
``python3 -m mdivif influence --config configs/normal_dpd.cfg --out out/``.
"""

import json
import tempfile
from pathlib import Path

from mdivif.cli import main

here = Path(__file__).parent / "configs"
out = Path(tempfile.mkdtemp(prefix="mdivif-demo-"))

# %%
rc = main(["influence", "--config", str(here / "normal_dpd.cfg"), "--out", str(out)])
print("influence exit code", rc)
print((out / "influence.csv").read_text().splitlines()[:3])

# %%
rc = main(["sweep", "--config", str(here / "normal_dpd.cfg"), "--out", str(out),
           "--set", "sweep.alpha=[0, 0.25, 0.5, 1]", "--set", "grid.points=81"])
for row in json.loads((out / "sweep.json").read_text())["tuning"]:
    print(f"alpha={row['alpha']:<5} gamma*={row['gamma_star']:.4f} {row['verdict']}")

# %%
# validate runs zero-mean, tangency, five refit-oracle probes and (with
# validate.reps > 0) a Monte Carlo check; exit code 4 flags a failure.
rc = main(["validate", "--config", str(here / "poisson_hellinger.cfg"), "--out", str(out)])
print("validate exit code", rc)

# %%
rc = main(["validate", "--config", str(here / "normal_dpd.cfg"), "--out", str(out),
           "--set", "kernel=disparity(hellinger)", "--set", "mode=data"])
print("disparity on continuous data -> exit code", rc)
print("outputs in", out)
