"""Command-line front end.

Usage::

    nonlocal-eig eigen   --config run.json [--output out.json]
    nonlocal-eig sweep   --config run.json --format csv --jobs 4
    nonlocal-eig bounds  --config run.json
    nonlocal-eig witness --config run.json --seed 7
    nonlocal-eig evolve  --config run.json --format csv

The config is a JSON document with a ``problem`` section and one section per
task, for example::

    {"problem": {"dimension": 1,
                 "profile": {"shape": "epanechnikov", "mass": 1.0},
                 "map": {"kind": "linear", "matrix": [[2.0]]}},
     "eigen": {"radius": 16, "spacing": 0.05}}

Command-line flags override config keys.  Exit codes: 0 success, 2 invalid
input, 3 numerical failure (solver did not converge).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from typing import Any, Optional

import numpy as np

from . import bounds as bnd
from . import evolution as evo
from . import witnesses as wit
from .discretize import assemble_operator, build_grid
from .kernel import DeformationKernel, MapSpec, Profile
from .spectra import smallest_eigenpair, sweep_radius

log = logging.getLogger("nonlocal_eig")

TASKS = ("eigen", "sweep", "bounds", "witness", "evolve")
EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


def _need(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def _positive(section: dict, key: str, default=None) -> Optional[float]:
    v = section.get(key, default)
    if v is None:
        return None
    _need(isinstance(v, (int, float)) and not isinstance(v, bool) and np.isfinite(v) and v > 0,
          f"{key} must be a positive number, got {v!r}")
    return float(v)


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    _need(isinstance(cfg, dict), "config must be a JSON object")
    return cfg


def build_kernel(problem: dict) -> DeformationKernel:
    _need(isinstance(problem, dict), "missing problem section")
    d = problem.get("dimension")
    _need(d in (1, 2, 3), "problem.dimension must be 1, 2 or 3")
    prof = problem.get("profile", {"shape": "epanechnikov", "mass": 1.0})
    shape = prof.get("shape", "epanechnikov")
    if "constant" in prof:
        profile = Profile(shape, d, float(prof["constant"]))
    else:
        profile = Profile.normalized(shape, d, _positive(prof, "mass", 1.0))
    m = problem.get("map")
    _need(isinstance(m, dict), "problem.map must be an object")
    kind = m.get("kind", "linear")
    if kind == "linear":
        A = np.asarray(m.get("matrix"), dtype=float)
        _need(A.shape == (d, d), f"map matrix must be {d}x{d}")
        C = m.get("jordan_transform")
        blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in m.get("jordan_blocks", [])]
        amap = MapSpec.linear(A, None if C is None else np.asarray(C, dtype=float), blocks)
    elif kind == "sine_perturbed":
        amap = MapSpec.sine_perturbed(m.get("alpha"), m.get("beta"))
        _need(amap.dim == d, "map dimension does not match problem.dimension")
    else:
        raise ConfigError(f"unknown map kind {kind!r}")
    return DeformationKernel(profile, amap)


def _spacing_rule(section: dict):
    s = section.get("spacing")
    if isinstance(s, dict):
        _need(s.get("rule") == "fraction", "spacing rule must be {'rule': 'fraction', 'divisor': N}")
        div = _positive(s, "divisor")
        return lambda R: R / div
    _need(s is not None, "spacing is required")
    return _positive(section, "spacing")


def _tol(section: dict, args) -> float:
    tol = args.tol if args.tol is not None else section.get("tol", 1e-10)
    _need(isinstance(tol, (int, float)) and tol > 0, f"tol must be positive, got {tol!r}")
    return float(tol)


def _maxiter(section: dict) -> Optional[int]:
    m = section.get("maxiter")
    _need(m is None or (isinstance(m, int) and m > 0), "maxiter must be a positive integer")
    return m


def _operator(kernel, section):
    R = _positive(section, "radius")
    _need(R is not None, "radius is required")
    rule = _spacing_rule(section)
    h = rule(R) if callable(rule) else rule
    grid = build_grid(kernel.dim, R, h, kernel.map)
    return grid, assemble_operator(grid, kernel)


def run_eigen(kernel, section, args) -> tuple[dict, str]:
    tol = _tol(section, args)
    grid, op = _operator(kernel, section)
    res = smallest_eigenpair(op, tol=tol, maxiter=_maxiter(section))
    out = {"task": "eigen", "R": grid.radius, "h": grid.spacing, "n_interior": grid.n_interior}
    out.update(res.as_dict())
    out["min_eigvec"] = float(np.min(res.eigvec))
    out["bounds"] = bnd.bound_report(kernel).as_dict()
    if not res.converged:
        raise NumericalFailure(json.dumps(out))
    csv_text = "R,h,lambda1,lambda_T,iterations,residual,converged\n" + ",".join(
        [repr(grid.radius), repr(grid.spacing), repr(res.lambda1), repr(res.lambda_T), str(res.iterations),
         repr(res.residual), str(res.converged).lower()]) + "\n"
    return out, csv_text


def run_sweep(kernel, section, args) -> tuple[dict, str]:
    radii = section.get("radii")
    _need(isinstance(radii, list) and len(radii) > 0, "sweep.radii must be a non-empty list")
    _need(all(isinstance(r, (int, float)) and r > 0 for r in radii), "radii must be positive")
    _need(all(b > a for a, b in zip(radii, radii[1:])), "radii must be strictly increasing")
    jobs = args.jobs if args.jobs is not None else section.get("jobs", 1)
    table = sweep_radius(kernel, radii, _spacing_rule(section), tol=_tol(section, args),
                         maxiter=_maxiter(section), jobs=int(jobs), extrapolate=section.get("extrapolate", True))
    out = {"task": "sweep"}
    out.update(table.as_dict())
    if not all(r.converged for r in table.rows):
        raise NumericalFailure(json.dumps(out))
    return out, table.to_csv()


def run_bounds(kernel, section, args) -> tuple[dict, str]:
    cand = None
    if section.get("candidate", "smooth-radial") == "smooth-radial" and kernel.map.homogeneous:
        cand = bnd.default_candidate(kernel.dim)
    rep = bnd.bound_report(kernel, cand)
    out = {"task": "bounds"}
    out.update(rep.as_dict())
    R = section.get("radius")
    if R is not None and cand is not None:
        fr = bnd.finite_radius_bound(kernel, cand, _positive(section, "radius"), _positive(section, "delta", 2.0))
        out["finite_radius"] = {"R": fr.R, "delta": fr.delta, "C": fr.C, "leading": fr.leading,
                                "remainder": fr.remainder, "value": fr.value}
    keys = ["lower", "lower_case", "upper_sup", "upper_candidate", "exact_linear", "psi_mass"]
    csv_text = ",".join(keys) + "\n" + ",".join("" if out[k] is None else str(out[k]) for k in keys) + "\n"
    return out, csv_text


def run_witness(kernel, section, args) -> tuple[dict, str]:
    family = section.get("family")
    p = dict(section.get("params", {}))
    seed = args.seed if args.seed is not None else section.get("seed", 0)
    samples = int(section.get("samples", 100_000))
    A = kernel.map.matrix
    if family == "power_law":
        _need(A is not None and np.allclose(A, np.diag(np.diag(A))), "power_law needs a diagonal linear map")
        _, rep = wit.power_law_witness(np.diag(A), float(p.get("sigma", 0.49)), p.get("eps"))
    elif family == "expansive_geometric":
        _need(A is not None, "expansive_geometric needs a linear map")
        _, rep = wit.expansive_geometric_witness(A, float(p.get("sigma", 1.0)), samples, int(seed), p.get("J_max"))
    elif family == "jordan_shear":
        _, rep = wit.jordan_shear_witness(int(p.get("k", 9)), float(p.get("lambda", 1)), kernel.dim, samples, int(seed))
    elif family == "jordan_rotation":
        _, rep = wit.jordan_rotation_witness(int(p.get("k", 9)), float(p.get("theta", 1.0)), kernel.dim, samples,
                                             int(seed))
    else:
        raise ConfigError(f"unknown witness family {family!r}")
    out = rep.as_dict()
    out["task"] = "witness"
    if A is not None and rep.family in ("power_law", "expansive_geometric"):
        out["upper_bound_from_ratio"] = bnd.upper_bound_from_ratio(kernel, rep.measured_ratio)
        out["psi_mass"] = kernel.psi_mass
    keys = ["family", "analytic_ratio", "measured_ratio", "stderr", "samples", "seed"]
    csv_text = ",".join(keys) + "\n" + ",".join(str(out[k]) for k in keys) + "\n"
    return out, csv_text


def run_evolve(kernel, section, args) -> tuple[dict, str]:
    tol = _tol(section, args)
    grid, op = _operator(kernel, section)
    limit = evo.stability_limit(op)
    dt = section.get("dt")
    dt = _positive(section, "dt") if dt is not None else _positive(section, "dt_fraction", 0.5) * limit
    T_end = section.get("T_end", 40.0)
    _need(isinstance(T_end, (int, float)) and T_end >= 0, "T_end must be nonnegative")
    seed = args.seed if args.seed is not None else section.get("seed", 0)
    u0 = np.random.default_rng(int(seed)).uniform(size=op.n)
    traj = evo.simulate(op, u0, float(T_end), dt, int(section.get("record_every", 1)))
    res = smallest_eigenpair(op, tol=tol)
    out = {"task": "evolve", "dt": dt, "stability_limit": limit, "T_end": float(T_end), "seed": int(seed),
           "lambda1": res.lambda1, "lambda_T": res.lambda_T, "psi_mass": res.psi_mass,
           "times": traj.times.tolist(), "l2sq": traj.l2sq.tolist()}
    if len(traj.times) >= 20:
        out["fit"] = evo.fit_decay_rate(traj, float(section.get("window_fraction", 0.5))).as_dict()
    if not res.converged:
        raise NumericalFailure(json.dumps(out))
    return out, traj.to_csv()


RUNNERS = {"eigen": run_eigen, "sweep": run_sweep, "bounds": run_bounds, "witness": run_witness,
           "evolve": run_evolve}


def write_atomic(path: Optional[str], text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nonlocal-eig", description="Principal eigenvalue of deformation-kernel operators")
    ap.add_argument("task", choices=TASKS)
    ap.add_argument("--config", help="JSON config file")
    ap.add_argument("--output", help="output path (stdout if omitted)")
    ap.add_argument("--format", choices=("json", "csv"))
    ap.add_argument("--jobs", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--tol", type=float)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: Optional[list[str]] = None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        cfg = load_config(args.config)
        out_cfg = cfg.get("output", {})
        fmt = args.format or out_cfg.get("format", "json")
        _need(fmt in ("json", "csv"), f"unknown format {fmt!r}")
        path = args.output or out_cfg.get("path")
        _need(args.jobs is None or args.jobs >= 1, "--jobs must be at least 1")
        _need(args.tol is None or args.tol > 0, "--tol must be positive")
        kernel = build_kernel(cfg.get("problem"))
        section = cfg.get(args.task, {})
        _need(isinstance(section, dict), f"{args.task} section must be an object")
        result, csv_text = RUNNERS[args.task](kernel, section, args)
    except NumericalFailure as exc:
        print(f"error: solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, TypeError, KeyError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (RuntimeError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    text = json.dumps(result, indent=2, sort_keys=True) + "\n" if fmt == "json" else csv_text
    write_atomic(path, text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
