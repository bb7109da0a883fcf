"""Turn a :class:`SimulationConfig` into the numerical objects of one run."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import ConfigurationError
from .hysteresis import (ConstantDensity, PreisachOperator, SeparableDensity,
                         TabulatedDensity, ThresholdGrid, loaded_memory, sinh_outer)
from .mesh import MaterialLaws, Mesh1D


@dataclass(frozen=True)
class Problem:
    mesh: Mesh1D
    laws: MaterialLaws
    operator: PreisachOperator
    u0: np.ndarray
    memory0: np.ndarray
    final_time: float
    steps: int
    boundary: np.ndarray       # (steps + 1, 2) boundary pressures at t_i
    Lambda: float

    @property
    def tau(self) -> float:
        return self.final_time / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.tau

    @property
    def U(self) -> float:
        """Bound ``max(U*, Lambda)`` of all inputs and play states."""
        return max(self.laws.U_star, self.Lambda)

    @property
    def s0(self) -> np.ndarray:
        return self.operator.output(self.memory0, self.mesh.nodes)


def build_mesh(config) -> Mesh1D:
    return Mesh1D(config.mesh.length, config.mesh.nodes)


def build_density(config):
    d = config.preisach.density
    r_sup = math.inf if d.r_support is None else d.r_support
    if d.kind == "constant":
        v_sup = math.inf if d.v_support is None else d.v_support
        return ConstantDensity(d.value, r_support=r_sup, v_support=v_sup)
    if d.kind == "separable":
        return SeparableDensity(d.value, x_slope=d.x_slope, r_decay=d.r_decay,
                                v_decay=d.v_decay, r_support=r_sup)
    if d.kind == "tabulated":
        return TabulatedDensity.from_csv(config.resolve(d.file), panels=d.panels)
    raise ConfigurationError(f"unknown density kind {d.kind!r}")


def build_operator(config) -> PreisachOperator:
    pre = config.preisach
    U = max(pre.lambda_max, config.laws.u_star_bound)
    grid = ThresholdGrid(pre.thresholds, U)
    outer = None
    if pre.outer.kind == "sinh":
        outer = sinh_outer(pre.outer.strength, U)
    return PreisachOperator(grid, build_density(config), offset=pre.offset,
                            outer_g=outer, u_limit=U)


def build_kappa(config):
    k = config.laws.kappa
    if k.kind == "constant":
        val = k.value
        return (lambda x, s: val + 0.0 * np.asarray(x) + 0.0 * np.asarray(s)), val, val, 0.0
    if k.kind == "tanh":
        lo, hi, a, mid = k.k_min, k.k_max, k.slope, k.s_mid

        def kappa(x, s):
            return lo + 0.5 * (hi - lo) * (1.0 + np.tanh(a * (np.asarray(s) - mid))) + 0.0 * np.asarray(x)

        return kappa, lo, hi, 0.5 * (hi - lo) * abs(a)
    raise ConfigurationError(f"unknown kappa kind {k.kind!r}")


def _read_boundary_csv(path, steps):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"step", "left", "right"} <= set(reader.fieldnames):
            raise ConfigurationError(f"{path}: header must contain step,left,right")
        rows = {int(r["step"]): (float(r["left"]), float(r["right"])) for r in reader}
    missing = [i for i in range(steps + 1) if i not in rows]
    if missing:
        raise ConfigurationError(f"{path}: missing boundary values for steps {missing[:5]}")
    return np.array([rows[i] for i in range(steps + 1)])


def boundary_function(config):
    """Callable ``t -> (left, right)`` for the configured boundary pressure."""
    us = config.laws.u_star
    T = config.time.final
    if us.kind == "constant":
        return lambda t: (us.left0, us.right0)
    if us.kind == "ramp":
        l1 = us.left0 if us.left1 is None else us.left1
        r1 = us.right0 if us.right1 is None else us.right1
        return lambda t: (us.left0 + (l1 - us.left0) * t / T, us.right0 + (r1 - us.right0) * t / T)
    if us.kind == "sinusoid":
        def f(t):
            w = us.amplitude * math.sin(2.0 * math.pi * us.frequency * t / T)
            return (us.left0 + w, us.right0 + w)
        return f
    if us.kind == "csv":
        table = _read_boundary_csv(config.resolve(us.file), config.time.steps)
        times = np.linspace(0.0, T, config.time.steps + 1)
        return lambda t: (float(np.interp(t, times, table[:, 0])), float(np.interp(t, times, table[:, 1])))
    raise ConfigurationError(f"unknown u_star kind {us.kind!r}")


def boundary_series(config) -> np.ndarray:
    f = boundary_function(config)
    n = config.time.steps
    times = np.arange(n + 1) * (config.time.final / n)
    return np.array([f(t) for t in times], dtype=float)


def build_laws(config) -> MaterialLaws:
    kappa, k_lo, k_hi, k_bar = build_kappa(config)
    return MaterialLaws(kappa=kappa, kappa_star=k_lo, kappa_sup=k_hi, kappa_bar=k_bar,
                        gamma_left=config.laws.gamma_left, gamma_right=config.laws.gamma_right,
                        u_star=boundary_function(config), U_star=config.laws.u_star_bound)


def initial_pressure(config, x) -> np.ndarray:
    u0 = config.initial.u0
    x = np.asarray(x, dtype=float)
    if u0.kind == "constant":
        return np.full(x.shape, u0.value)
    if u0.kind == "quadratic":
        return u0.value + u0.curvature * (x - 0.5 * config.mesh.length) ** 2
    raise ConfigurationError(f"unknown u0 kind {u0.kind!r}")


def _memory_from_csv(path, x, r):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"x", "r", "lambda"} <= set(reader.fieldnames):
            raise ConfigurationError(f"{path}: header must contain x,r,lambda")
        rows = [(float(t["x"]), float(t["r"]), float(t["lambda"])) for t in reader]
    xs = np.unique([t[0] for t in rows])
    rs = np.unique([t[1] for t in rows])
    if len(rows) != xs.size * rs.size:
        raise ConfigurationError(f"{path}: memory table is not a full rectangular grid")
    table = np.empty((xs.size, rs.size))
    table[np.searchsorted(xs, [t[0] for t in rows]), np.searchsorted(rs, [t[1] for t in rows])] = [t[2] for t in rows]
    interp = RegularGridInterpolator((xs, rs), table, bounds_error=False, fill_value=None)
    X, R = np.meshgrid(x, r, indexing="ij")
    out = interp(np.stack([np.clip(X, xs[0], xs[-1]), np.clip(R, rs[0], rs[-1])], axis=-1))
    return np.where(R > rs[-1], 0.0, out)


def initial_memory(config, x, grid, u0) -> np.ndarray:
    m = config.initial.memory
    Lam = config.preisach.lambda_max
    if m.kind == "loaded":
        return loaded_memory(u0, grid, 0.0)
    if m.kind == "from_top":
        return loaded_memory(u0, grid, Lam)
    if m.kind == "from_bottom":
        return loaded_memory(u0, grid, -Lam)
    if m.kind == "csv":
        return _memory_from_csv(config.resolve(m.file), np.asarray(x), grid.nodes)
    raise ConfigurationError(f"unknown memory kind {m.kind!r}")


def build_problem(config) -> Problem:
    mesh = build_mesh(config)
    op = build_operator(config)
    u0 = initial_pressure(config, mesh.nodes)
    memory0 = initial_memory(config, mesh.nodes, op.grid, u0)
    return Problem(mesh=mesh, laws=build_laws(config), operator=op, u0=u0, memory0=memory0,
                   final_time=config.time.final, steps=config.time.steps,
                   boundary=boundary_series(config), Lambda=config.preisach.lambda_max)
