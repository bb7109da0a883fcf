"""Time-step refinement studies: run a scenario at tau, tau/2, ... and compare levels."""

from __future__ import annotations

import math

import numpy as np

from . import diagnostics as diag
from .spaces import space_time_norms
from .stepper import run_simulation


def hat_on_grid(field, T: float, times) -> np.ndarray:
    """Piecewise linear interpolant of a ``(n+1, nodes)`` history evaluated at ``times``."""
    field = np.asarray(field, dtype=float)
    pos = np.clip(np.asarray(times, dtype=float) / T * (field.shape[0] - 1), 0, field.shape[0] - 1)
    i = np.minimum(np.floor(pos).astype(int), field.shape[0] - 2)
    lam = (pos - i)[:, None]
    return (1 - lam) * field[i] + lam * field[i + 1]


def level_summary(traj) -> dict:
    gu, gs = diag.interpolant_gap(traj)
    tau = traj.tau
    U = traj.problem.U
    alpha = diag.alpha_tau(tau, U) if 0 < tau < 1 else math.nan
    reports = diag.run_estimate_suite(traj)
    return {
        "n": traj.steps,
        "tau": tau,
        "philog_increment_sum": diag.philog_increment_sum(traj),
        "energy_sum": diag.energy_sum(traj),
        "gap_u": gu,
        "gap_G": gs,
        "alpha": alpha,
        "weak_residual": diag.weak_residual(traj),
        "hard_failures": [r.name for r in diag.hard_failures(reports)],
    }


def refinement_study(config, levels: int, force: bool = False, keep: bool = False) -> dict:
    """Run ``levels`` halvings of the time step and collect the comparison report.

    With ``keep=True`` the trajectories are returned under ``"trajectories"``.
    """
    if levels < 2:
        raise ValueError("a refinement study needs at least two levels")
    base = config.time.steps
    trajs = []
    for k in range(levels):
        cfg = config.replace(**{"time.steps": base * 2**k})
        trajs.append(run_simulation(cfg, force=force))
    summaries = [level_summary(t) for t in trajs]
    T = config.time.final
    mesh = trajs[0].problem.mesh
    diffs = []
    for coarse, fine in zip(trajs[:-1], trajs[1:]):
        fu = fine.field("u")
        cu = hat_on_grid(coarse.field("u"), T, fine.times)
        _, y = space_time_norms(cu - fu, mesh, T)
        diffs.append({"n_coarse": coarse.steps, "n_fine": fine.steps,
                      "final_sup": float(np.abs(coarse.states[-1].u - fine.states[-1].u).max()),
                      "y_norm": y})
    for a, b in zip(diffs[:-1], diffs[1:]):
        for key in ("final_sup", "y_norm"):
            b[f"order_{key}"] = (math.log2(a[key] / b[key]) if a[key] > 0 and b[key] > 0 else math.nan)

    c_gap = summaries[0]["gap_u"] / summaries[0]["alpha"] if summaries[0]["alpha"] > 0 else math.nan
    y = [d["y_norm"] for d in diffs]
    wr = [s["weak_residual"] for s in summaries]
    ref = summaries[0]
    checks = {
        "y_norm_decreasing": all(b < a for a, b in zip(y[:-1], y[1:])),
        "philog_within_3x": all(s["philog_increment_sum"] <= 3 * ref["philog_increment_sum"] for s in summaries),
        "energy_within_3x": all(s["energy_sum"] <= 3 * ref["energy_sum"] for s in summaries),
        "gap_below_fitted_alpha": all(s["gap_u"] <= c_gap * s["alpha"] * (1 + 1e-12) for s in summaries),
        "weak_residual_decreasing": all(b < a for a, b in zip(wr[:-1], wr[1:])),
    }
    out = {"levels": summaries, "differences": diffs, "gap_constant": c_gap, "checks": checks}
    if keep:
        out["trajectories"] = trajs
    return out
