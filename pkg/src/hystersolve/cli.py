"""Command line entry point ``hystersolve``.

Exit codes: 0 success, 1 step failure, 2 estimate or compatibility failure,
3 configuration or input failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

import numpy as np

from . import __version__
from . import diagnostics as diag
from .config import parse_config
from .errors import ConfigError, HystersolveError, StepFailure
from .mesh import Mesh1D
from .spaces import SampledFunction, luxemburg_norm, sobolev_time_norms, space_time_norms, young_function
from .stepper import check_initial_compatibility, run_simulation
from .writers import dump_json, write_csv, write_run_outputs

log = logging.getLogger("hystersolve")

EXIT_OK, EXIT_STEP, EXIT_ESTIMATE, EXIT_CONFIG = 0, 1, 2, 3


def _out_dir(args, config) -> str:
    if args.out_dir:
        return args.out_dir
    return config.resolve(config.output.directory)


def _load(path):
    try:
        return parse_config(path)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}" if exc.line is None else f"config error (line {exc.line}): {v}",
                  file=sys.stderr)
        return None
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return None


def cmd_run(args) -> int:
    config = _load(args.config)
    if config is None:
        return EXIT_CONFIG
    try:
        traj = run_simulation(config, force=args.force)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"compatibility failure: {v}", file=sys.stderr)
        print("rerun with --force to integrate anyway", file=sys.stderr)
        return EXIT_ESTIMATE
    except StepFailure as exc:
        print(f"step failure: {exc}", file=sys.stderr)
        return EXIT_STEP
    except (HystersolveError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    reports = diag.run_estimate_suite(traj)
    failed = diag.hard_failures(reports)
    code = EXIT_ESTIMATE if failed else EXIT_OK
    out = _out_dir(args, config)
    paths = write_run_outputs(out, traj, reports, code, memory=config.output.memory_snapshots)
    if config.output.figures:
        from .plotting import run_figures
        run_figures(out, traj)
    for r in reports:
        print(f"{r.name:26s} {r.status:4s} measured={r.measured:.6g} bound={r.bound:.6g}")
    print(f"wrote {len(traj.rows)} steps to {paths['diagnostics']}")
    return code


def cmd_refine(args) -> int:
    from .study import refinement_study

    config = _load(args.config)
    if config is None:
        return EXIT_CONFIG
    if args.levels < 2:
        print("refine: --levels must be at least 2", file=sys.stderr)
        return EXIT_CONFIG
    try:
        study = refinement_study(config, args.levels, force=args.force)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"compatibility failure: {v}", file=sys.stderr)
        return EXIT_ESTIMATE
    except StepFailure as exc:
        print(f"step failure: {exc}", file=sys.stderr)
        return EXIT_STEP
    out = _out_dir(args, config)
    os.makedirs(out, exist_ok=True)
    code = EXIT_ESTIMATE if any(lv["hard_failures"] for lv in study["levels"]) else EXIT_OK
    payload = dict(study, schema_version=1, exit_code=code)
    dump_json(payload, os.path.join(out, "refine.json"))
    cols = ("n", "tau", "philog_increment_sum", "energy_sum", "gap_u", "gap_G", "alpha", "weak_residual")
    write_csv(os.path.join(out, "refine.csv"), cols, ([lv[c] for c in cols] for lv in study["levels"]))
    if config.output.figures:
        from .plotting import plot_refinement
        plot_refinement(study, os.path.join(out, "refine.png"))
    print(dump_json({"differences": study["differences"], "checks": study["checks"]}))
    return code


def cmd_check_compat(args) -> int:
    config = _load(args.config)
    if config is None:
        return EXIT_CONFIG
    try:
        report = check_initial_compatibility(config)
    except (HystersolveError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(dump_json(report))
    return EXIT_OK if report["pass"] else EXIT_ESTIMATE


def _read_samples(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no samples")
    data = np.array(rows)
    if data.shape[1] != len(header):
        raise ValueError(f"{path}: rows do not match the header")
    return [h.strip() for h in header], data


def _uniform(coord, name):
    d = np.diff(coord)
    if coord.size < 2 or np.any(d <= 0) or np.ptp(d) > 1e-9 * abs(d.mean()):
        raise ValueError(f"{name} samples must be uniformly increasing")
    return coord[-1] - coord[0]


def norms_of_samples(header, data, which) -> dict:
    """Norms of CSV samples: two columns ``(coord, value)`` or three ``(t, x, u)``."""
    out = {}
    if data.shape[1] == 2:
        coord, vals = data[:, 0], data[:, 1]
        length = _uniform(coord, header[0])
        f = SampledFunction.trapezoid(vals, length)
        for name in which:
            if name.startswith("luxemburg"):
                _, _, phi = name.partition(":")
                out[name] = luxemburg_norm(f, young_function(phi or "power:2"))
            elif name in ("H", "V", "Vstar"):
                h, v, vs = sobolev_time_norms(vals, length)
                out[name] = {"H": h, "V": v, "Vstar": vs}[name]
            else:
                raise ValueError(f"norm {name!r} is not available for one-dimensional samples")
        return out
    if data.shape[1] == 3:
        t = np.unique(data[:, 0])
        x = np.unique(data[:, 1])
        if t.size * x.size != data.shape[0]:
            raise ValueError("space-time samples do not form a full grid")
        T = _uniform(t, header[0])
        L = _uniform(x, header[1])
        field = np.empty((t.size, x.size))
        field[np.searchsorted(t, data[:, 0]), np.searchsorted(x, data[:, 1])] = data[:, 2]
        grid = Mesh1D(L, x.size)
        for name in which:
            if name in ("X", "Y"):
                nx, ny = space_time_norms(field, grid, T)
                out[name] = nx if name == "X" else ny
            elif name.startswith("luxemburg"):
                _, _, phi = name.partition(":")
                out[name] = luxemburg_norm(SampledFunction.space_time(field, grid.lumped_mass, T),
                                           young_function(phi or "power:2"))
            else:
                raise ValueError(f"norm {name!r} is not available for space-time samples")
        return out
    raise ValueError("expected two columns (coord,value) or three columns (t,x,u)")


def cmd_norms(args) -> int:
    which = [n for group in args.norm for n in group.split(",") if n]
    if not which:
        print("norms: at least one --norm is required", file=sys.stderr)
        return EXIT_CONFIG
    try:
        header, data = _read_samples(args.csv)
        result = norms_of_samples(header, data, which)
    except (OSError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(dump_json(result))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hystersolve",
                                description="Degenerate diffusion with Preisach hysteresis in 1-D.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--force", action="store_true", help="integrate despite failed compatibility checks")
    p.add_argument("--out-dir", help="output directory (default: output.directory of the config)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    # the global options are also accepted after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--force", action="store_true", default=argparse.SUPPRESS)
    common.add_argument("--out-dir", default=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="simulate one configuration and write all outputs")
    r.add_argument("config")
    r.set_defaults(func=cmd_run)

    f = sub.add_parser("refine", parents=[common], help="time-step refinement study")
    f.add_argument("config")
    f.add_argument("--levels", type=int, default=3)
    f.set_defaults(func=cmd_refine)

    c = sub.add_parser("check-compat", parents=[common], help="check the initial data and print the report")
    c.add_argument("config")
    c.set_defaults(func=cmd_check_compat)

    n = sub.add_parser("norms", parents=[common], help="norms of sampled data from a CSV file")
    n.add_argument("csv")
    n.add_argument("--norm", action="append", default=[],
                   help="luxemburg[:power:p|philog|exp_minus_linear], H, V, Vstar, X, Y (repeatable)")
    n.set_defaults(func=cmd_norms)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
