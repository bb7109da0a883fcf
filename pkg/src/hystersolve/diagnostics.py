"""Post-hoc checks of the a priori estimates on a computed trajectory.

Every check returns plain numbers or an :class:`EstimateReport`; the suite
marks a handful of them as hard (they decide the exit code of ``run``) and
the rest as informational (bound ``inf``).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .hysteresis import ENGAGE_TOL, play_update
from .mesh import element_permeability
from .spaces import SampledFunction, luxemburg_norm, philog
from .stepper import Trajectory, mass_residual, mass_scale


@dataclass
class EstimateReport:
    name: str
    measured: float
    bound: float
    status: str = "pass"          # pass | warn | fail
    hard: bool = False
    context: dict = field(default_factory=dict)
    detail: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("measured", "bound"):
            v = d[key]
            d[key] = v if math.isfinite(v) else (None if math.isnan(v) else ("inf" if v > 0 else "-inf"))
        return d


def _report(name, measured, bound, hard, context, detail="", tol=0.0):
    status = "fail" if measured > bound + tol else "pass"
    return EstimateReport(name, float(measured), float(bound), status, hard, dict(context), detail)


def phi_log(v):
    v = np.abs(np.asarray(v, dtype=float))
    return v * np.log1p(v)


# ---------------------------------------------------------------------------
# f, F, Gamma of the convexity estimate
# ---------------------------------------------------------------------------

def f_conv(w, tau: float):
    w = np.asarray(w, dtype=float)
    return w / (tau + np.abs(w))


def F_conv(w, tau: float):
    a = np.abs(np.asarray(w, dtype=float))
    y = a / tau
    small = y < 1e-4
    ys = np.where(small, y, 0.0)
    # tau * (y - log(1 + y)) without cancellation for small y
    series = tau * (ys**2 / 2 - ys**3 / 3 + ys**4 / 4)
    return np.where(small, series, a - tau * np.log1p(y))


def Gamma_conv(w, tau: float):
    a = np.abs(np.asarray(w, dtype=float))
    y = a / tau
    small = y < 1e-4
    ys = np.where(small, y, 0.0)
    # log(1 + y) - y / (1 + y) = y^2/2 - 2y^3/3 + 3y^4/4 - ...
    series = ys**2 / 2 - 2 * ys**3 / 3 + 3 * ys**4 / 4
    return tau * a * np.where(small, series, np.log1p(y) - y / (1.0 + y))


# ---------------------------------------------------------------------------
# alpha(tau)
# ---------------------------------------------------------------------------

def alpha_tau(tau: float, U: float) -> float:
    """Upper bound of ``log(1+v) / log(1+v/tau)`` over ``v in (0, 2U)``."""
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    if not U > 0:
        raise ValueError("U must be positive")
    st = math.sqrt(tau)
    return max(math.log1p(2 * U) / math.log1p(1 / st), st / math.log(2), 2 * st)


def alpha_tau_sweep(tau: float, U: float, samples: int = 10_000) -> dict:
    """Largest sampled log-ratio on an interior grid of ``(0, 2U)`` against ``alpha(tau)``."""
    alpha = alpha_tau(tau, U)
    v = np.linspace(0.0, 2 * U, samples + 2)[1:-1]
    ratio = np.log1p(v) / np.log1p(v / tau)
    k = int(np.argmax(ratio))
    return {"tau": tau, "U": U, "alpha": alpha, "max_ratio": float(ratio[k]), "argmax": float(v[k]),
            "holds": bool(ratio[k] <= alpha)}


# ---------------------------------------------------------------------------
# Prandtl-Ishlinskii convexity inequality
# ---------------------------------------------------------------------------

def _density_table(density, r_max, thresholds):
    dr = r_max / thresholds
    r = (np.arange(thresholds) + 0.5) * dr
    if callable(density):
        rho = np.asarray(density(r), dtype=float) * np.ones_like(r)
    else:
        rn, vals = (np.asarray(a, dtype=float) for a in density)
        rho = np.interp(r, rn, vals)
    return r, rho, dr


def convexity_inequality_check(density: Union[Callable, tuple], w, w_minus1: float, tau: float,
                               U: float = 1.0, r_max: Optional[float] = None,
                               thresholds: int = 512) -> dict:
    """Evaluate both sides of the discrete convexity inequality for a PI operator.

    ``density`` is either a callable ``rho(r)`` or a table ``(r_nodes, values)``
    on ``(0, r_max)``. Outputs start from virgin memory and ``w_minus1`` is
    fed first. When ``w_0 = w_{-1}`` the difference quotient is replaced by
    the branch slope in the direction of the first nonzero increment.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size < 1:
        raise ValueError("w must be a nonempty sequence")
    if np.any(np.abs(w) > U * (1 + 1e-12)) or abs(w_minus1) > U * (1 + 1e-12):
        raise ValueError("inputs must lie in [-U, U]")
    if r_max is None:
        r_max = U if callable(density) else float(np.asarray(density[0])[-1])
    r, rho, dr = _density_table(density, r_max, thresholds)
    if np.any(rho <= 0):
        raise ValueError("density must be positive")

    seq = np.concatenate([[w_minus1], w])
    xi = np.zeros_like(r)
    P = np.empty(seq.size)
    memories = []
    for k, wk in enumerate(seq):
        xi = play_update(wk, xi, r)
        memories.append(xi)
        P[k] = float(np.dot(rho, xi)) * dr
    # P[k] is P[w]_{k-1}
    inc = np.diff(w)
    second = P[2:] - 2 * P[1:-1] + P[:-2]
    main = float(np.dot(second, f_conv(inc, tau))) if inc.size else 0.0
    d0 = w[0] - w_minus1
    if d0 != 0.0:
        ratio = (P[1] - P[0]) / d0
    else:
        nz = inc[inc != 0.0]
        direction = 1.0 if nz.size == 0 else math.copysign(1.0, nz[0])
        mem = memories[0]
        tol = ENGAGE_TOL * max(1.0, abs(w_minus1))
        if direction > 0:
            engaged = w_minus1 - r >= mem - tol
        else:
            engaged = w_minus1 + r <= mem + tol
        ratio = float(np.dot(rho, engaged)) * dr
    lhs = main + ratio * float(F_conv(d0, tau))
    rhs = float(np.sum(Gamma_conv(inc, tau))) if inc.size else 0.0
    beta = math.inf if rhs == 0.0 else 2.0 * lhs / rhs
    return {"lhs": lhs, "rhs_base": rhs, "beta_hat": beta, "ratio_term": ratio,
            "outputs": P.tolist(), "positive": bool(beta > 0)}


# ---------------------------------------------------------------------------
# trajectory sums
# ---------------------------------------------------------------------------

def _increments(traj: Trajectory, name: str = "u") -> np.ndarray:
    return np.diff(traj.field(name), axis=0)


def philog_increment_sum(traj: Trajectory) -> float:
    """``sum_i int |u_{i+1} - u_i| log(1 + |u_{i+1} - u_i| / tau) dx`` (nodal quadrature)."""
    if traj.steps == 0:
        return 0.0
    a = np.abs(_increments(traj))
    return float(np.sum(a * np.log1p(a / traj.tau) @ traj.problem.mesh.lumped_mass))


def energy_sum(traj: Trajectory) -> float:
    """``tau sum_i (int |u_x|^2 + gamma_L u_i(0)^2 + gamma_R u_i(L)^2)`` over ``i = 1..n``."""
    if traj.steps == 0:
        return 0.0
    U = traj.field("u")[1:]
    h = traj.problem.mesh.h
    laws = traj.problem.laws
    grad = np.sum(np.diff(U, axis=1) ** 2, axis=1) / h
    bnd = laws.gamma_left * U[:, 0] ** 2 + laws.gamma_right * U[:, -1] ** 2
    return float(traj.tau * np.sum(grad + bnd))


def interpolant_gap(traj: Trajectory):
    """``(gap_u, gap_G)``: ``int Phi_log(max_i |increment|) dx`` for ``u`` and for ``G``."""
    if traj.steps == 0:
        return 0.0, 0.0
    m = traj.problem.mesh.lumped_mass
    gu = float(np.dot(m, phi_log(np.abs(_increments(traj, "u")).max(axis=0))))
    gs = float(np.dot(m, phi_log(np.abs(_increments(traj, "s")).max(axis=0))))
    return gu, gs


def philog_time_sum(traj: Trajectory, name: str = "u") -> float:
    """``sum_i int Phi_log(|increment_i|) dx``, the right end of the gap chain."""
    if traj.steps == 0:
        return 0.0
    return float(np.sum(phi_log(_increments(traj, name)) @ traj.problem.mesh.lumped_mass))


def time_derivative_norm_integral(traj: Trajectory) -> float:
    """``int_Omega |u_t(x, .)|_{Phi_log} dx`` for the piecewise linear interpolant."""
    if traj.steps == 0:
        return 0.0
    rates = _increments(traj) / traj.tau
    weights = np.full(traj.steps, traj.tau)
    phi = philog()
    norms = [luxemburg_norm(SampledFunction(rates[:, k], weights), phi) for k in range(rates.shape[1])]
    return float(np.dot(traj.problem.mesh.lumped_mass, norms))


def default_sigma(T: float):
    """``sigma(t) = sin^2(pi t / T)`` and its derivative."""
    return (lambda t: np.sin(np.pi * np.asarray(t) / T) ** 2,
            lambda t: (np.pi / T) * np.sin(2 * np.pi * np.asarray(t) / T))


def weak_residual(traj: Trajectory, sigma=None, theta=None, sigma_dot=None) -> float:
    """Absolute value of the weak form evaluated on the interpolants.

    ``sigma`` is a callable or samples at the trajectory times and must
    vanish at both ends; ``sigma_dot`` defaults to the exact derivative for
    the built-in profile and to second-order differences for samples.
    ``theta`` is a nodal test profile (default ones). Time integrals use the
    trapezoid rule on every step, with the one-sided values of the
    piecewise constant interpolants.
    """
    times = traj.times
    T = times[-1]
    if sigma is None:
        sigma, sigma_dot = default_sigma(T)
    if callable(sigma):
        sig = np.asarray(sigma(times), dtype=float) * np.ones_like(times)
    else:
        sig = np.asarray(sigma, dtype=float)
        if sig.shape != times.shape:
            raise ValueError("sigma samples do not match the time grid")
    scale = max(1.0, float(np.abs(sig).max()))
    if abs(sig[0]) > 1e-12 * scale or abs(sig[-1]) > 1e-12 * scale:
        raise ValueError("sigma must vanish at both ends of the time interval")
    if sigma_dot is None:
        sdot = np.gradient(sig, traj.tau, edge_order=2) if sig.size > 2 else np.zeros_like(sig)
    elif callable(sigma_dot):
        sdot = np.asarray(sigma_dot(times), dtype=float) * np.ones_like(times)
    else:
        sdot = np.asarray(sigma_dot, dtype=float)
    problem = traj.problem
    mesh, laws = problem.mesh, problem.laws
    theta = np.ones(mesh.n) if theta is None else np.asarray(theta, dtype=float)
    if theta.shape != (mesh.n,):
        raise ValueError("theta does not match the mesh")
    m = mesh.lumped_mass
    tau = traj.tau
    S = traj.field("s")
    Uf = traj.field("u")
    dtheta = np.diff(theta) / mesh.h

    # -int sigma' G_hat theta: G_hat is continuous, trapezoid over all grid times
    g_theta = S @ (m * theta)
    wt = np.full(times.size, tau)
    wt[0] = wt[-1] = 0.5 * tau
    total = -float(np.sum(wt * sdot * g_theta))
    for i in range(1, traj.steps + 1):
        step_sigma = 0.5 * tau * (sig[i - 1] + sig[i])
        if step_sigma == 0.0:
            continue
        ke = element_permeability(mesh, laws.kappa, S[i])
        diff = float(np.sum(ke * np.diff(Uf[i]) / mesh.h * dtheta) * mesh.h)
        ul, ur = problem.boundary[i]
        bnd = (laws.gamma_left * (Uf[i][0] - ul) * theta[0]
               + laws.gamma_right * (Uf[i][-1] - ur) * theta[-1])
        total += step_sigma * (diff + bnd)
    return abs(total)


# ---------------------------------------------------------------------------
# suite
# ---------------------------------------------------------------------------

def _rho_max(problem) -> float:
    op = problem.operator
    U = problem.U
    x = problem.mesh.nodes[:, None, None]
    r = op.grid.nodes[None, :, None]
    v = np.linspace(-U, U, 201)[None, None, :]
    vals = np.asarray(op.density(x, r, v), dtype=float) * np.ones((x.shape[0], r.shape[1], v.shape[2]))
    return float(vals.max())


def dissipation_violations(traj: Trajectory):
    """Count of ``(psi_i - psi_{i-1}) w_i < Psi_i - Psi_{i-1}`` beyond a relative 1e-12."""
    problem = traj.problem
    op = problem.operator
    x = problem.mesh.nodes
    count, worst = 0, 0.0
    psi_prev, Psi_prev = op.potentials(traj.states[0].memory, x)
    for st in traj.states[1:]:
        psi, Psi = op.potentials(st.memory, x)
        w = op.input_map(st.u)[:, None]
        gap = (Psi - Psi_prev) - (psi - psi_prev) * w
        scale = 1e-12 * np.maximum.reduce([np.ones_like(gap), np.abs(psi * w), np.abs(psi_prev * w),
                                           np.abs(Psi), np.abs(Psi_prev)])
        bad = gap > scale
        count += int(np.count_nonzero(bad))
        worst = max(worst, float((gap / scale).max()))
        psi_prev, Psi_prev = psi, Psi
    return count, worst


def run_estimate_suite(traj: Trajectory) -> list:
    """All estimate reports for a completed trajectory."""
    problem = traj.problem
    tau = traj.tau
    U = problem.U
    tol = traj.solver.tol
    ctx = {"tau": tau, "n": traj.steps, "nodes": problem.mesh.n}
    reports = []

    Uf = traj.field("u")
    reports.append(_report("max_principle", float(np.abs(Uf).max()), U + 10 * tol, True, ctx,
                           "max |u_i| against max(U*, Lambda) + 10 tol"))

    S = traj.field("s")
    rho1 = _rho_max(problem)
    out_bound = rho1 * U**2 / 2
    out = float(np.abs(S - problem.operator.offset).max())
    reports.append(_report("output_bound", out, out_bound, True, dict(ctx, rho1=rho1),
                           "|s - G_bar| against rho1 U^2 / 2", tol=1e-12 * max(1.0, out_bound)))

    scale = mass_scale(problem)
    mres = [abs(mass_residual(problem, traj.states[i - 1], traj.states[i], problem.boundary[i]))
            for i in range(1, traj.steps + 1)]
    reports.append(_report("mass_balance", max(mres, default=0.0), 10 * tol * scale, True,
                           dict(ctx, scale=scale), "per-step mass residual"))

    count, worst = dissipation_violations(traj)
    reports.append(_report("dissipation", count, 0, True, dict(ctx, worst_relative=worst),
                           "pointwise hysteresis dissipation violations"))

    reports.append(_report("energy_sum", energy_sum(traj), math.inf, False, ctx,
                           "tau sum of gradient and boundary energy"))

    ps = philog_increment_sum(traj)
    reports.append(_report("philog_increment_sum", ps, math.inf, False, ctx))

    lhs = time_derivative_norm_integral(traj)
    length = problem.mesh.length
    reports.append(_report("philog_norm_implication", lhs, ps + length, True, ctx,
                           "int |u_t|_Phi_log dx against philog sum + |Omega|", tol=1e-12 * (ps + length)))

    gu, gs = interpolant_gap(traj)
    chain = philog_time_sum(traj)
    alpha = alpha_tau(tau, U) if 0 < tau < 1 else math.nan
    reports.append(_report("interpolant_gap_u", gu, chain, True,
                           dict(ctx, alpha=alpha, ratio=gu / alpha if alpha == alpha else math.nan),
                           "gap_u against sum_i int Phi_log(|u_i - u_(i-1)|)", tol=1e-12 * max(1.0, chain)))
    reports.append(_report("interpolant_gap_G", gs, math.inf, False,
                           dict(ctx, alpha=alpha, ratio=gs / alpha if alpha == alpha else math.nan)))

    reports.append(_report("weak_residual", weak_residual(traj), math.inf, False, ctx,
                           "sigma = sin^2(pi t / T), theta = 1"))
    return reports


def hard_failures(reports) -> list:
    return [r for r in reports if r.hard and r.status == "fail"]
