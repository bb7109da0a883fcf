"""Matplotlib figures for run and refinement outputs (files only, no display)."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .writers import snapshot_indices  # noqa: E402


def plot_fields(traj, path, stride: int = 10) -> str:
    x = traj.problem.mesh.nodes
    idx = snapshot_indices(traj.steps, stride)
    colors = plt.cm.viridis(np.linspace(0, 1, len(idx)))
    fig, (ax_u, ax_s) = plt.subplots(1, 2, figsize=(10, 4), constrained_layout=True)
    for c, i in zip(colors, idx):
        st = traj.states[i]
        ax_u.plot(x, st.u, color=c, lw=1)
        ax_s.plot(x, st.s, color=c, lw=1)
    ax_u.set(xlabel="x", ylabel="u", title="pressure")
    ax_s.set(xlabel="x", ylabel="s", title="saturation")
    sm = plt.cm.ScalarMappable(cmap="viridis", norm=plt.Normalize(0, traj.states[-1].time))
    fig.colorbar(sm, ax=ax_s, label="t")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_diagnostics(rows, path) -> str:
    t = np.array([r["time"] for r in rows])
    fig, axes = plt.subplots(2, 2, figsize=(10, 7), constrained_layout=True)
    ax = axes.ravel()
    ax[0].semilogy(t, np.maximum(np.abs([r["mass_residual"] for r in rows]), 1e-300))
    ax[0].set(title="mass residual", xlabel="t")
    ax[1].plot(t, [r["energy_grad"] for r in rows], label="gradient")
    ax[1].plot(t, [r["energy_boundary"] for r in rows], label="boundary")
    ax[1].set(title="energy", xlabel="t")
    ax[1].legend()
    ax[2].plot(t, [r["philog_increment"] for r in rows])
    ax[2].set(title="Phi_log increment", xlabel="t")
    ax[3].plot(t, [r["solver_iters"] for r in rows], drawstyle="steps-mid")
    ax[3].set(title="solver iterations", xlabel="t")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_loops(traj, path, count: int = 5) -> str:
    """Saturation against pressure at a few nodes."""
    U = traj.field("u")
    S = traj.field("s")
    x = traj.problem.mesh.nodes
    nodes = np.unique(np.linspace(0, x.size - 1, count).round().astype(int))
    fig, ax = plt.subplots(figsize=(5, 4), constrained_layout=True)
    for k in nodes:
        ax.plot(U[:, k], S[:, k], lw=1, label=f"x = {x[k]:.2f}")
    ax.set(xlabel="u", ylabel="s", title="hysteresis paths")
    ax.legend(fontsize="small")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_refinement(study, path) -> str:
    n = np.array([lv["n"] for lv in study["levels"]])
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(10, 4), constrained_layout=True)
    pairs = study["differences"]
    if pairs:
        nn = [p["n_fine"] for p in pairs]
        a1.loglog(nn, [max(p["y_norm"], 1e-300) for p in pairs], "o-", label="Y norm")
        a1.loglog(nn, [max(p["final_sup"], 1e-300) for p in pairs], "s-", label="final sup")
        a1.set(xlabel="n (finer level)", title="level differences")
        a1.legend()
    a2.semilogx(n, [lv["philog_increment_sum"] for lv in study["levels"]], "o-", label="Phi_log sum")
    a2.semilogx(n, [lv["gap_u"] / lv["alpha"] for lv in study["levels"]], "s-", label="gap_u / alpha")
    a2.set(xlabel="n", title="uniform bounds")
    a2.legend()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def run_figures(out_dir, traj) -> list:
    stride = traj.config.output.stride if traj.config is not None else 10
    return [
        plot_fields(traj, os.path.join(out_dir, "fields.png"), stride),
        plot_diagnostics(traj.rows, os.path.join(out_dir, "diagnostics.png")),
        plot_loops(traj, os.path.join(out_dir, "loops.png")),
    ]
