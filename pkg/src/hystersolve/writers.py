"""CSV and JSON writers for trajectories, reports and refinement studies."""

from __future__ import annotations

import csv
import json
import math
import os

import numpy as np

from .config import flatten

SCHEMA_VERSION = 1

DIAGNOSTIC_COLUMNS = ("step", "time", "max_abs_u", "mass_residual", "energy_grad", "energy_boundary",
                      "psi_total", "philog_increment", "solver_iters", "solver_residual")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def snapshot_indices(steps: int, stride: int) -> list:
    idx = list(range(0, steps + 1, stride))
    if idx[-1] != steps:
        idx.append(steps)
    return idx


def write_diagnostics_csv(path, rows) -> None:
    write_csv(path, DIAGNOSTIC_COLUMNS, ([r[c] for c in DIAGNOSTIC_COLUMNS] for r in rows))


def write_fields_csv(path, traj, stride: int) -> None:
    x = traj.problem.mesh.nodes

    def rows():
        for i in snapshot_indices(traj.steps, stride):
            st = traj.states[i]
            for k in range(x.size):
                yield st.index, st.time, x[k], st.u[k], st.s[k]

    write_csv(path, ("step", "time", "x", "u", "s"), rows())


def write_memory_csv(path, traj, stride: int) -> None:
    x = traj.problem.mesh.nodes
    r = traj.problem.operator.grid.nodes

    def rows():
        for i in snapshot_indices(traj.steps, stride):
            st = traj.states[i]
            for k in range(x.size):
                for j in range(r.size):
                    yield st.index, st.time, x[k], r[j], st.memory[k, j]

    write_csv(path, ("step", "time", "x", "r", "xi"), rows())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dump_json(obj, path=None) -> str:
    text = json.dumps(_jsonable(obj), indent=2)
    if path is not None:
        with open(path, "w", newline="\n") as fh:
            fh.write(text + "\n")
    return text


def write_summary_json(path, traj, reports, exit_code: int) -> None:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "exit_code": exit_code,
        "steps": traj.steps,
        "tau": traj.tau,
        "estimates": [r.to_dict() for r in reports],
        "compatibility": traj.compat,
        "config": flatten(traj.config) if traj.config is not None else None,
    }
    dump_json(payload, path)


def write_run_outputs(out_dir, traj, reports, exit_code: int, memory: bool = False) -> dict:
    """Write every CSV/JSON output of a run; returns the written paths by kind."""
    os.makedirs(out_dir, exist_ok=True)
    stride = traj.config.output.stride if traj.config is not None else 10
    paths = {
        "diagnostics": os.path.join(out_dir, "diagnostics.csv"),
        "fields": os.path.join(out_dir, "fields.csv"),
        "summary": os.path.join(out_dir, "summary.json"),
    }
    write_diagnostics_csv(paths["diagnostics"], traj.rows)
    write_fields_csv(paths["fields"], traj, stride)
    if memory:
        paths["memory"] = os.path.join(out_dir, "memory.csv")
        write_memory_csv(paths["memory"], traj, stride)
    write_summary_json(paths["summary"], traj, reports, exit_code)
    return paths
