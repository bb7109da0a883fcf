"""Implicit time stepping for ``s_t = (kappa(x, s) u_x)_x``, ``s = G[u]``.

Each step solves the lumped P1 system

    m_k (G_k(u) - s_prev_k) / tau + (K(s) u)_k + robin_k(u) = 0

by damped fixed-point iteration. At iterate ``u^(k)`` the nodal hysteresis
map is replaced by its local branch tangent (one-sided, in the direction the
node is moving), the permeability is frozen at ``s(u^(k))``, the tridiagonal
system is solved and the result is relaxed:

    u^(k+1) = (1 - omega) u^(k) + omega u_solve.

The fixed points of this map are exactly the solutions of the step system,
whatever slope is used in the linearization.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, StepFailure
from .mesh import (Mesh1D, assemble_step_system, discrete_divergence, element_permeability,
                   solve_tridiagonal, stiffness_apply)
from .problem import Problem, build_problem

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverSettings:
    tol: float = 1e-10
    max_iter: int = 200
    relaxation: float = 0.8
    retries: int = 3

    @classmethod
    def from_config(cls, config):
        s = config.solver
        return cls(s.tol, s.max_iter, s.relaxation, s.retries)


@dataclass(frozen=True)
class StepState:
    index: int
    time: float
    u: np.ndarray
    s: np.ndarray
    memory: np.ndarray
    iterations: int = 0
    residual: float = 0.0
    relaxation: float = float("nan")


@dataclass
class Trajectory:
    problem: Problem
    states: list
    solver: SolverSettings
    config: object = None
    rows: list = field(default_factory=list)
    compat: Optional[dict] = None

    @property
    def tau(self) -> float:
        return self.problem.tau

    @property
    def steps(self) -> int:
        return len(self.states) - 1

    @property
    def times(self) -> np.ndarray:
        return np.array([st.time for st in self.states])

    def field(self, name: str) -> np.ndarray:
        """Stacked nodal history, shape ``(n_states, n_nodes)``; ``name`` is ``u`` or ``s``."""
        return np.array([getattr(st, name) for st in self.states])

    def append(self, state: StepState) -> None:
        if state.index != len(self.states):
            raise ValueError("states must be appended in order")
        self.states.append(state)


# ---------------------------------------------------------------------------
# per-step quantities
# ---------------------------------------------------------------------------

def _raw_residual(problem: Problem, prev: StepState, u, s, u_star_now) -> np.ndarray:
    mesh, laws, tau = problem.mesh, problem.laws, problem.tau
    ke = element_permeability(mesh, laws.kappa, s)
    res = mesh.lumped_mass * (s - prev.s) / tau + stiffness_apply(mesh, ke, u)
    res[0] += laws.gamma_left * (u[0] - u_star_now[0])
    res[-1] += laws.gamma_right * (u[-1] - u_star_now[1])
    return res


def nonlinear_residual(problem: Problem, prev: StepState, u, s, u_star_now) -> np.ndarray:
    """Nodal residual of the step system, scaled by ``tau / m_k`` (saturation units)."""
    return _raw_residual(problem, prev, u, s, u_star_now) * problem.tau / problem.mesh.lumped_mass


def mass_residual(problem: Problem, prev: StepState, state: StepState, u_star_now) -> float:
    """``sum_k m_k (s_i - s_{i-1})_k + tau * (boundary fluxes)``; zero for an exact step."""
    laws = problem.laws
    m = problem.mesh.lumped_mass
    flux = laws.gamma_left * (state.u[0] - u_star_now[0]) + laws.gamma_right * (state.u[-1] - u_star_now[1])
    return float(np.dot(m, state.s - prev.s) + problem.tau * flux)


def mass_scale(problem: Problem) -> float:
    """Magnitude against which mass residuals are compared."""
    _, rho1, _ = problem.operator.density.bounds(problem.mesh.length, problem.U, samples=9)
    laws = problem.laws
    U = problem.U
    g_sup = problem.operator.outer_g.g_sup if problem.operator.outer_g is not None else 1.0
    return (problem.mesh.length * max(1.0, rho1 * U * g_sup)
            + problem.tau * (laws.gamma_left + laws.gamma_right) * max(1.0, U))


def gradient_energy(mesh: Mesh1D, u) -> float:
    return float(np.sum(np.diff(u) ** 2) / mesh.h)


def boundary_energy(problem: Problem, u) -> float:
    laws = problem.laws
    return float(laws.gamma_left * u[0] ** 2 + laws.gamma_right * u[-1] ** 2)


def potential_energy(problem: Problem, memory) -> float:
    """``int_Omega sum_j Psi(x, r_j, xi_j) dr dx`` under nodal quadrature."""
    _, Psi = problem.operator.potentials(memory, problem.mesh.nodes)
    return float(np.dot(problem.mesh.lumped_mass, Psi.sum(axis=-1)) * problem.operator.grid.dr)


def philog_increment(mesh: Mesh1D, du, tau: float) -> float:
    a = np.abs(du)
    return float(np.dot(mesh.lumped_mass, a * np.log1p(a / tau)))


def step_row(problem: Problem, prev: StepState, state: StepState) -> dict:
    ust = problem.boundary[state.index]
    return {
        "step": state.index,
        "time": state.time,
        "max_abs_u": float(np.abs(state.u).max()),
        "mass_residual": mass_residual(problem, prev, state, ust),
        "energy_grad": gradient_energy(problem.mesh, state.u),
        "energy_boundary": boundary_energy(problem, state.u),
        "psi_total": potential_energy(problem, state.memory),
        "philog_increment": philog_increment(problem.mesh, state.u - prev.u, problem.tau),
        "solver_iters": state.iterations,
        "solver_residual": state.residual,
    }


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

def initial_state(problem: Problem) -> StepState:
    return StepState(0, 0.0, problem.u0.copy(), problem.s0, problem.memory0.copy())


def solve_step(prev: StepState, u_star_now, problem: Problem,
               solver: SolverSettings = SolverSettings(), relaxation: Optional[float] = None) -> StepState:
    """Advance one time level; raises :class:`StepFailure` without convergence."""
    mesh, laws, op, tau = problem.mesh, problem.laws, problem.operator, problem.tau
    omega = solver.relaxation if relaxation is None else relaxation
    x = mesh.nodes
    u = prev.u.copy()
    index = prev.index + 1
    delta = math.inf
    for k in range(1, solver.max_iter + 1):
        s_trial = op.output(op.update(prev.memory, u), x)
        up = op.slopes(prev.memory, u, x, +1)
        down = op.slopes(prev.memory, u, x, -1)
        moving = u - prev.u
        slope = np.where(moving > 0, up, np.where(moving < 0, down, 0.5 * (up + down)))
        system = assemble_step_system(mesh, laws, s_trial, prev.s, u_star_now, tau,
                                      (slope, s_trial - slope * u), check=False)
        # correction form: a state with zero residual is reproduced exactly
        system = dataclasses.replace(system, rhs=-_raw_residual(problem, prev, u, s_trial, u_star_now))
        correction = solve_tridiagonal(system)
        u = u + omega * correction
        delta = float(np.abs(omega * correction).max())
        if not np.isfinite(delta):
            break
        if delta <= solver.tol * max(1.0, float(np.abs(u).max())):
            memory = op.update(prev.memory, u)
            s = op.output(memory, x)
            res = float(np.abs(nonlinear_residual(problem, prev, u, s, u_star_now)).max())
            # the update test alone can stop a hair early on steep branches
            if res <= solver.tol * max(1.0, float(np.abs(s).max())):
                return StepState(index, index * tau, u, s, memory, k, res, omega)
    raise StepFailure(f"step {index}: no convergence after {solver.max_iter} iterations "
                      f"(last update {delta:.3e})", step=index, residual=delta,
                      iterations=solver.max_iter)


def simulate(problem: Problem, solver: SolverSettings = SolverSettings(), config=None,
             compat: Optional[dict] = None) -> Trajectory:
    """Run all steps of ``problem``; halves the relaxation on failure up to ``solver.retries`` times."""
    traj = Trajectory(problem, [initial_state(problem)], solver, config=config, compat=compat)
    for i in range(1, problem.steps + 1):
        prev = traj.states[-1]
        omega = solver.relaxation
        for attempt in range(solver.retries + 1):
            try:
                state = solve_step(prev, problem.boundary[i], problem, solver, relaxation=omega)
                break
            except StepFailure as exc:
                if attempt == solver.retries:
                    exc.step = i
                    raise
                log.warning("step %d failed with omega=%.3g, retrying with %.3g", i, omega, omega / 2)
                omega /= 2
        traj.append(state)
        traj.rows.append(step_row(problem, prev, state))
    return traj


def run_simulation(config, force: bool = False, problem: Optional[Problem] = None) -> Trajectory:
    """Validate the initial data of ``config`` and integrate to the final time."""
    problem = build_problem(config) if problem is None else problem
    compat = check_initial_compatibility(config, problem=problem)
    failed = [it for it in compat["items"] if it["status"] == "fail"]
    if failed and not force:
        raise ConfigError([f"hy1: {it['name']} failed ({it['detail']})" for it in failed])
    return simulate(problem, SolverSettings.from_config(config), config=config, compat=compat)


# ---------------------------------------------------------------------------
# interpolants
# ---------------------------------------------------------------------------

class Interpolants:
    """Piecewise linear (``hat``) and piecewise constant (``bar``) time interpolants.

    ``bar`` takes the value ``u_i`` on ``(t_{i-1}, t_i]`` and ``u_0`` at ``t = 0``,
    so both modes agree with the grid values at every ``t_i``.
    """

    def __init__(self, traj: Trajectory, mode: str = "hat", field: str = "u"):
        if mode not in ("hat", "bar"):
            raise ValueError(f"unknown interpolant mode {mode!r}")
        if field not in ("u", "s"):
            raise ValueError(f"unknown field {field!r}")
        self.traj = traj
        self.mode = mode
        self.field = field
        self._values = traj.field(field)
        self.tau = traj.tau
        self.T = traj.tau * traj.steps

    def _locate(self, t):
        if t < -1e-14 * max(1.0, self.T) or t > self.T * (1 + 1e-14) + 1e-14:
            raise ValueError(f"time {t} outside [0, {self.T}]")
        t = min(max(t, 0.0), self.T)
        i = int(math.ceil(t / self.tau - 1e-12))
        return min(max(i, 1), self.traj.steps), t

    def values(self, t) -> np.ndarray:
        """Nodal values at time ``t``."""
        i, t = self._locate(t)
        v = self._values
        if self.mode == "bar":
            return v[0] if t == 0.0 else v[i]
        lam = (t - (i - 1) * self.tau) / self.tau
        return v[i - 1] + lam * (v[i] - v[i - 1])

    def __call__(self, node: int, t: float) -> float:
        return float(self.values(t)[node])

    def derivative(self, node: int, t: float) -> float:
        """Time derivative of the hat interpolant (zero for bar) inside a step."""
        if self.mode == "bar":
            return 0.0
        i, _ = self._locate(t)
        v = self._values
        return float((v[i][node] - v[i - 1][node]) / self.tau)


def interpolant_eval(interp: Interpolants, x_node: int, t: float) -> float:
    return interp(x_node, t)


# ---------------------------------------------------------------------------
# initial compatibility
# ---------------------------------------------------------------------------

def _item(name, status, measured, bound, detail="", **extra):
    d = {"name": name, "status": status, "measured": measured, "bound": bound, "detail": detail}
    d.update(extra)
    return d


def check_initial_compatibility(config, problem: Optional[Problem] = None,
                                lambda0=None) -> dict:
    """Check the initial memory, pressure and boundary data for compatibility.

    ``lambda0`` overrides the memory at ``r = 0`` (by default the built-in
    memory profiles satisfy ``lambda(x, 0) = u0(x)`` by construction).
    Every item is ``pass``, ``warn`` or ``fail`` with the measured quantity.
    """
    problem = build_problem(config) if problem is None else problem
    mesh, laws, op = problem.mesh, problem.laws, problem.operator
    x = mesh.nodes
    u0, lam = problem.u0, problem.memory0
    r, dr = op.grid.nodes, op.grid.dr
    Lam = problem.Lambda
    items = []

    # c0: lambda(x, 0) = u0 and play admissibility on the grid
    if lambda0 is None:
        lambda0 = _memory_at_zero(config, problem)
    gap0 = np.abs(lambda0 - u0)
    adm = np.abs(lam - u0[:, None]) - r
    k0 = int(np.argmax(gap0))
    worst = max(float(gap0.max()) - 1e-12 * max(1.0, float(np.abs(u0).max())), float(adm.max()) - 1e-12)
    items.append(_item("c0", "pass" if worst <= 0 else "fail", float(gap0.max()), 0.0,
                       f"max |lambda(x,0) - u0| at x = {x[k0]:.6g}",
                       location=float(x[k0]), admissibility=float(max(0.0, adm.max()))))

    # c0a: initial saturation determined by lambda
    s0 = problem.s0
    s_direct = op.offset + (op.density.psi(x[:, None], r, lam).sum(axis=-1)) * dr
    d0a = float(np.abs(s0 - s_direct).max())
    items.append(_item("c0a", "pass" if d0a <= 1e-12 * max(1.0, float(np.abs(s0).max())) else "fail",
                       d0a, 0.0, "s0 computed from the initial memory"))

    # c1: sqrt|div| / L <= r0 <= Lambda
    div = discrete_divergence(mesh, laws, s0, u0, problem.boundary[0])
    Lc = 1.0
    r0 = None
    if config is not None:
        Lc = config.initial.compat.L if config.initial.compat.L is not None else 1.0
        r0 = config.initial.compat.r0
    root = np.sqrt(np.abs(div)) / Lc
    r0 = np.minimum(Lam, root) if r0 is None else np.full(mesh.n, float(r0))
    c1 = float(max(0.0, (root - r0).max(), (r0 - Lam).max()))
    items.append(_item("c1", "pass" if c1 <= 1e-12 * max(1.0, float(root.max())) else "fail", c1, 0.0,
                       "sqrt|div(kappa grad u0)| / L <= r0 <= Lambda",
                       div=div.tolist(), r0=r0.tolist(), L=Lc))

    # c2: -d lambda / dr in sign(div) on (0, r0)
    div_tol = 1e-9 * max(1.0, float(np.abs(div).max()))
    ext = np.concatenate([np.asarray(lambda0)[:, None], lam], axis=1)
    left = np.concatenate([[0.0], r])
    widths = np.diff(left)
    neg_slope = -np.diff(ext, axis=1) / widths
    right_end = left[1:]
    c2 = 0.0
    where = None
    for k in range(mesh.n):
        active = right_end <= r0[k] + 1e-14
        if not active.any():
            continue
        sl = neg_slope[k, active]
        if div[k] > div_tol:
            dev = float(np.abs(sl - 1.0).max())
        elif div[k] < -div_tol:
            dev = float(np.abs(sl + 1.0).max())
        else:
            dev = float(max(0.0, np.abs(sl).max() - 1.0))
        if dev > c2:
            c2, where = dev, float(x[k])
    items.append(_item("c2", "pass" if c2 <= 1e-6 else "fail", c2, 1e-6,
                       "memory slope matches sign of div on (0, r0)" if where is None
                       else f"largest deviation at x = {where:.6g}", location=where))

    # c2a: discrete Robin compatibility at both ends
    mism = []
    for side in (0, 1):
        if side == 0:
            du = (-3 * u0[0] + 4 * u0[1] - u0[2]) / (2 * mesh.h) if mesh.n >= 3 else (u0[1] - u0[0]) / mesh.h
            flux = float(laws.kappa(x[0], s0[0])) * du          # -kappa u' n with n = -1
            robin = laws.gamma_left * (u0[0] - problem.boundary[0][0])
        else:
            du = (3 * u0[-1] - 4 * u0[-2] + u0[-3]) / (2 * mesh.h) if mesh.n >= 3 else (u0[-1] - u0[-2]) / mesh.h
            flux = -float(laws.kappa(x[-1], s0[-1])) * du
            robin = laws.gamma_right * (u0[-1] - problem.boundary[0][1])
        scale = max(1.0, abs(flux), abs(robin))
        mism.append(abs(flux - robin) / scale)
    c2a = float(max(mism))
    status = "pass" if c2a <= 1e-8 else ("warn" if c2a <= 1e-6 else "fail")
    items.append(_item("c2a", status, c2a, 1e-8, "boundary flux of u0 vs gamma (u0 - u*(0))",
                       left=mism[0], right=mism[1]))

    # inim: backward step G_{-1} = G_0 - tau div
    tau = problem.tau
    up = op.slopes(lam, u0, x, +1)
    down = op.slopes(lam, u0, x, -1)
    slope = np.where(div > 0, up, down)
    nz = np.abs(div) > div_tol
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = np.where(nz, np.abs(div) / slope, 0.0)
    rate_max = float(rate.max()) if rate.size else 0.0
    rho0, _, _ = op.density.bounds(mesh.length, problem.U, samples=9)
    tau_max = rho0 / (2 * Lc**2) if rho0 > 0 else 0.0
    status = "pass" if np.isfinite(rate_max) else "warn"
    detail = "|G0 - G_-1| / tau = |div|; |u0 - u_-1| / tau estimated from the branch slope"
    if nz.any() and tau >= tau_max:
        status = "warn"
        detail += f"; tau = {tau:.3g} not below rho0 / (2 L^2) = {tau_max:.3g}"
    items.append(_item("inim", status, rate_max, float(np.abs(div).max()), detail,
                       g_rate=float(np.abs(div).max()), tau_max=tau_max))

    ok = all(it["status"] == "pass" for it in items)
    return {"pass": ok, "fail": any(it["status"] == "fail" for it in items), "items": items}


def _memory_at_zero(config, problem: Problem) -> np.ndarray:
    if config is not None and config.initial.memory.kind == "csv":
        from .problem import _memory_from_csv
        return _memory_from_csv(config.resolve(config.initial.memory.file), problem.mesh.nodes,
                                np.array([0.0]))[:, 0]
    return problem.u0.copy()
