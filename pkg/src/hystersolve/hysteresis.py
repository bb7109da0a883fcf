"""Scalar hysteresis engine: discrete play operators and Preisach superposition.

The Preisach output is computed as

    s = G_bar + sum_j psi(x, r_j, xi^{r_j}) * dr

over a midpoint grid of thresholds, where ``xi^r`` is the state of the play
operator with threshold ``r`` and ``psi(x, r, xi)`` is the primitive of the
density in the state variable. Memory is held as a dense array of shape
``(n_nodes, n_thresholds)``; every update is a pure function of its inputs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import ConfigurationError, RangeError, ThresholdError

ENGAGE_TOL = 1e-12
SIMPSON_PANELS = 64


# ---------------------------------------------------------------------------
# play operator
# ---------------------------------------------------------------------------

def play_update(u_new, xi_prev, r):
    """One step of the discrete play operator with threshold ``r``.

    Returns ``min(u_new + r, max(u_new - r, xi_prev))``, the unique solution
    of the discrete variational inequality. Works elementwise on arrays.
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ThresholdError(f"play threshold must be nonnegative, got {r}")
    out = np.minimum(np.add(u_new, r_arr), np.maximum(np.subtract(u_new, r_arr), xi_prev))
    if np.ndim(out) == 0:
        return float(out)
    return out


def play_sequence(inputs, xi0, r):
    """Fold :func:`play_update` over ``inputs`` starting from memory ``xi0``."""
    if r < 0:
        raise ThresholdError(f"play threshold must be nonnegative, got {r}")
    out = []
    xi = float(xi0)
    for u in inputs:
        xi = min(u + r, max(u - r, xi))
        out.append(xi)
    return out


# ---------------------------------------------------------------------------
# threshold grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThresholdGrid:
    """Midpoint grid ``r_j = (j - 1/2) dr`` on ``(0, lambda_max)``."""

    count: int
    lambda_max: float

    def __post_init__(self):
        if int(self.count) < 1:
            raise ConfigurationError("threshold grid needs at least one node")
        if not self.lambda_max > 0:
            raise ConfigurationError("threshold grid bound must be positive")

    @property
    def dr(self) -> float:
        return self.lambda_max / self.count

    @property
    def nodes(self) -> np.ndarray:
        return (np.arange(self.count) + 0.5) * self.dr


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------

def _mean_exp(y):
    # (1 - exp(-y)) / y for y >= 0
    y = np.asarray(y, dtype=float)
    pos = y > 0
    return np.where(pos, -np.expm1(-y) / np.where(pos, y, 1.0), 1.0)


_MOMENT_SERIES = [(-1) ** n * (n - 1) / math.factorial(n) for n in range(2, 11)]


def _moment_exp(y):
    # (1 - (1 + y) exp(-y)) / y^2 for y >= 0, series below 0.1
    y = np.asarray(y, dtype=float)
    small = y < 0.1
    ys = np.where(small, y, 0.0)
    series = np.zeros_like(ys)
    for c in reversed(_MOMENT_SERIES):
        series = series * ys + c
    yl = np.where(small, 1.0, y)
    direct = (-np.expm1(-yl) - yl * np.exp(-yl)) / (yl * yl)
    return np.where(small, series, direct)


class PreisachDensity:
    """Common interface of the Preisach densities ``rho(x, r, v)``.

    Subclasses provide ``__call__``, ``psi`` and ``Psi``; all of them
    broadcast over ``x``, ``r`` and ``xi``.
    """

    kind = "abstract"
    # |xi| above this raises RangeError in psi/Psi
    v_limit = math.inf
    # density vanishes for r >= r_extent
    r_extent = math.inf
    v_extent = math.inf

    def __call__(self, x, r, v):
        raise NotImplementedError

    def psi(self, x, r, xi):
        raise NotImplementedError

    def Psi(self, x, r, xi):
        raise NotImplementedError

    def _check_range(self, xi):
        if np.any(np.abs(xi) > self.v_limit * (1 + 1e-12)):
            raise RangeError(
                f"state {np.max(np.abs(xi)):.6g} outside density range {self.v_limit:.6g}")

    def bounds(self, length: float, U: float, samples: int = 41):
        """Sampled ``(rho0(U), rho1, rho_bar)`` over ``[0, length] x (0,U) x (-U,U)``.

        ``rho0`` is the smallest and ``rho1`` the largest sampled value;
        ``rho_bar`` is the largest sampled difference quotient in ``x``.
        """
        xs = np.linspace(0.0, length, samples)
        rs = (np.arange(samples) + 0.5) * (U / samples)
        vs = -U + (np.arange(2 * samples) + 0.5) * (U / samples)
        X, R, V = np.meshgrid(xs, rs, vs, indexing="ij")
        vals = np.broadcast_to(np.asarray(self(X, R, V), dtype=float), X.shape)
        rho_bar = 0.0
        if samples > 1 and length > 0:
            dq = np.abs(np.diff(vals, axis=0)) / (xs[1] - xs[0])
            rho_bar = float(dq.max())
        return float(vals.min()), float(vals.max()), rho_bar


class ConstantDensity(PreisachDensity):
    """``rho = value`` on ``(0, r_support) x (-v_support, v_support)``, zero elsewhere."""

    kind = "constant"

    def __init__(self, value: float, r_support: float = math.inf, v_support: float = math.inf):
        if value < 0:
            raise ConfigurationError("density value must be nonnegative")
        self.value = float(value)
        self.r_support = float(r_support)
        self.v_support = float(v_support)
        self.r_extent = self.r_support
        self.v_extent = self.v_support

    def __call__(self, x, r, v):
        inside = (np.asarray(r) < self.r_support) & (np.abs(v) < self.v_support)
        return np.where(inside, self.value, 0.0) + 0.0 * np.asarray(x, dtype=float)

    def _weight(self, r):
        return np.where(np.asarray(r) < self.r_support, self.value, 0.0)

    def psi(self, x, r, xi):
        xi = np.asarray(xi, dtype=float)
        return self._weight(r) * np.clip(xi, -self.v_support, self.v_support)

    def Psi(self, x, r, xi):
        c = np.clip(np.asarray(xi, dtype=float), -self.v_support, self.v_support)
        return self._weight(r) * 0.5 * c * c


class SeparableDensity(PreisachDensity):
    """Product density ``scale * (1 + x_slope x) * b(r) * exp(-v_decay |v|)``.

    ``b(r)`` is ``exp(-r_decay r)`` cut off at ``r_support`` unless a callable
    ``r_factor`` is given. With ``v_decay = 0`` the density does not depend on
    ``v`` and the operator is of Prandtl-Ishlinskii type.
    """

    kind = "separable"

    def __init__(self, scale: float = 1.0, x_slope: float = 0.0, r_decay: float = 0.0,
                 v_decay: float = 0.0, r_support: float = math.inf,
                 r_factor: Optional[Callable] = None):
        if scale < 0 or v_decay < 0:
            raise ConfigurationError("separable density needs scale >= 0 and v_decay >= 0")
        self.scale = float(scale)
        self.x_slope = float(x_slope)
        self.r_decay = float(r_decay)
        self.v_decay = float(v_decay)
        self.r_support = float(r_support)
        self.r_factor = r_factor
        self.r_extent = self.r_support

    def _xr(self, x, r):
        r = np.asarray(r, dtype=float)
        if self.r_factor is not None:
            b = np.asarray(self.r_factor(r), dtype=float)
        else:
            b = np.exp(-self.r_decay * r)
        b = np.where(r < self.r_support, b, 0.0)
        return self.scale * (1.0 + self.x_slope * np.asarray(x, dtype=float)) * b

    def __call__(self, x, r, v):
        return self._xr(x, r) * np.exp(-self.v_decay * np.abs(v))

    def psi(self, x, r, xi):
        xi = np.asarray(xi, dtype=float)
        k = self.v_decay
        if k == 0:
            prim = xi
        else:
            prim = xi * _mean_exp(k * np.abs(xi))
        return self._xr(x, r) * prim

    def Psi(self, x, r, xi):
        xi = np.asarray(xi, dtype=float)
        k = self.v_decay
        if k == 0:
            prim = 0.5 * xi * xi
        else:
            prim = xi * xi * _moment_exp(k * np.abs(xi))
        return self._xr(x, r) * prim


class TabulatedDensity(PreisachDensity):
    """Density given on a rectangular ``(r, v)`` table, bilinear in between.

    The table does not depend on ``x``. Outside the ``r`` range the density is
    zero; states outside the ``v`` range raise :class:`RangeError`.
    ``psi`` and ``Psi`` use composite Simpson quadrature in ``v``.
    """

    kind = "tabulated"

    def __init__(self, r_nodes, v_nodes, values, panels: int = SIMPSON_PANELS):
        self.r_nodes = np.asarray(r_nodes, dtype=float)
        self.v_nodes = np.asarray(v_nodes, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != (self.r_nodes.size, self.v_nodes.size):
            raise ConfigurationError("density table shape does not match its axes")
        if np.any(np.diff(self.r_nodes) <= 0) or np.any(np.diff(self.v_nodes) <= 0):
            raise ConfigurationError("density table axes must be strictly increasing")
        if np.any(self.values < 0):
            raise ConfigurationError("density table has negative entries")
        if panels % 2:
            panels += 1
        self.panels = panels
        self.v_limit = float(min(-self.v_nodes[0], self.v_nodes[-1]))
        self.r_extent = float(self.r_nodes[-1])
        self.v_extent = self.v_limit

    @classmethod
    def from_csv(cls, path, panels: int = SIMPSON_PANELS):
        """Read a table with header ``r,v,rho`` (row-major, r outer)."""
        rows = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"r", "v", "rho"} <= set(reader.fieldnames):
                raise ConfigurationError(f"{path}: header must contain r,v,rho")
            for row in reader:
                rows.append((float(row["r"]), float(row["v"]), float(row["rho"])))
        r_nodes = np.unique([t[0] for t in rows])
        v_nodes = np.unique([t[1] for t in rows])
        if len(rows) != r_nodes.size * v_nodes.size:
            raise ConfigurationError(f"{path}: table is not a full rectangular grid")
        table = np.empty((r_nodes.size, v_nodes.size))
        ri = np.searchsorted(r_nodes, [t[0] for t in rows])
        vi = np.searchsorted(v_nodes, [t[1] for t in rows])
        table[ri, vi] = [t[2] for t in rows]
        return cls(r_nodes, v_nodes, table, panels=panels)

    def __call__(self, x, r, v):
        r = np.asarray(r, dtype=float)
        v = np.asarray(v, dtype=float)
        r, v = np.broadcast_arrays(r, v)
        rn, vn = self.r_nodes, self.v_nodes
        i = np.clip(np.searchsorted(rn, r, side="right") - 1, 0, rn.size - 2) if rn.size > 1 else np.zeros(r.shape, int)
        k = np.clip(np.searchsorted(vn, v, side="right") - 1, 0, vn.size - 2) if vn.size > 1 else np.zeros(v.shape, int)
        if rn.size > 1:
            tr = np.clip((r - rn[i]) / (rn[i + 1] - rn[i]), 0.0, 1.0)
        else:
            tr = np.zeros(r.shape)
        if vn.size > 1:
            tv = np.clip((v - vn[k]) / (vn[k + 1] - vn[k]), 0.0, 1.0)
        else:
            tv = np.zeros(v.shape)
        i1 = np.minimum(i + 1, rn.size - 1)
        k1 = np.minimum(k + 1, vn.size - 1)
        t = self.values
        val = ((1 - tr) * (1 - tv) * t[i, k] + tr * (1 - tv) * t[i1, k]
               + (1 - tr) * tv * t[i, k1] + tr * tv * t[i1, k1])
        outside = (r < rn[0]) | (r > rn[-1]) | (v < vn[0]) | (v > vn[-1])
        out = np.where(outside, 0.0, val)
        return out + 0.0 * np.asarray(x, dtype=float)

    def _simpson(self, x, r, xi, moment):
        xi = np.asarray(xi, dtype=float)
        self._check_range(xi)
        n = self.panels
        t = np.linspace(0.0, 1.0, n + 1)
        w = np.ones(n + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        w /= 3.0 * n
        r_b, xi_b = np.broadcast_arrays(np.asarray(r, dtype=float), xi)
        v = xi_b[..., None] * t
        integrand = self(0.0, r_b[..., None], v)
        if moment:
            integrand = integrand * v
        return xi_b * (integrand @ w)

    def psi(self, x, r, xi):
        return self._simpson(x, r, xi, moment=False)

    def Psi(self, x, r, xi):
        return self._simpson(x, r, xi, moment=True)


def psi_and_Psi(x, r, xi, density: PreisachDensity):
    """Return ``(psi, Psi)``: the zeroth and first moment of ``rho`` over ``[0, xi]``."""
    density._check_range(np.asarray(xi))
    psi = density.psi(x, r, xi)
    Psi = density.Psi(x, r, xi)
    if np.ndim(psi) == 0:
        return float(psi), float(Psi)
    return psi, Psi


# ---------------------------------------------------------------------------
# outer function for generalized Prandtl-Ishlinskii operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OuterFunction:
    """Increasing ``C^2`` map ``g`` with ``g(0) = 0`` applied before the play layer."""

    g: Callable
    dg: Callable
    d2g: Callable
    g_star: float
    g_sup: float
    g_bar: float
    name: str = "custom"

    def check(self, U: float, samples: int = 2001) -> dict:
        """Sample ``g`` on ``[-U, U]`` and verify its derivative bounds by finite differences."""
        u = np.linspace(-U, U, samples)
        h = u[1] - u[0]
        gu = self.g(u)
        d1 = np.gradient(gu, h)
        d2 = np.diff(gu, 2) / h**2
        slack = 1e-6 * max(1.0, self.g_sup)
        return {
            "g0": abs(float(self.g(0.0))) <= 1e-14,
            "lower": bool(d1.min() >= self.g_star - slack),
            "upper": bool(d1.max() <= self.g_sup + slack),
            "curvature": bool(np.abs(d2).max() <= self.g_bar + 1e-4 * max(1.0, self.g_bar)),
            "maps_into": bool(np.abs(gu).max() <= U * (1 + 1e-12)),
        }


def sinh_outer(strength: float, U: float) -> OuterFunction:
    """``g(u) = U sinh(a u / U) / sinh(a)``, which maps ``[-U, U]`` onto itself."""
    a = float(strength)
    if a <= 0:
        raise ConfigurationError("sinh outer function needs a positive strength")
    sa = math.sinh(a)
    return OuterFunction(
        g=lambda u: U * np.sinh(a * np.asarray(u) / U) / sa,
        dg=lambda u: a * np.cosh(a * np.asarray(u) / U) / sa,
        d2g=lambda u: a * a * np.sinh(a * np.asarray(u) / U) / (U * sa),
        g_star=a / sa,
        g_sup=a * math.cosh(a) / sa,
        g_bar=a * a / U,
        name="sinh",
    )


# ---------------------------------------------------------------------------
# Preisach operator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PreisachOperator:
    """Preisach operator ``G = P o g`` discretized on a threshold grid.

    ``u_limit`` is the declared input range ``U``; :func:`preisach_step`
    refuses inputs beyond it.
    """

    grid: ThresholdGrid
    density: PreisachDensity
    offset: float = 0.0
    outer_g: Optional[OuterFunction] = None
    u_limit: float = math.inf

    def input_map(self, u):
        if self.outer_g is None:
            return np.asarray(u, dtype=float)
        return np.asarray(self.outer_g.g(u), dtype=float)

    def input_slope(self, u):
        if self.outer_g is None:
            return np.ones_like(np.asarray(u, dtype=float))
        return np.asarray(self.outer_g.dg(u), dtype=float)

    # vectorized kernels; memory has shape (n_nodes, count)

    def update(self, memory, u):
        w = self.input_map(u)
        r = self.grid.nodes
        return np.minimum(w[..., None] + r, np.maximum(w[..., None] - r, memory))

    def output(self, memory, x):
        memory = np.asarray(memory, dtype=float)
        if memory.shape[-1] != self.grid.count:
            raise ConfigurationError(
                f"memory has {memory.shape[-1]} thresholds, grid has {self.grid.count}")
        x = np.asarray(x, dtype=float)
        psi = self.density.psi(x[..., None], self.grid.nodes, memory)
        return self.offset + psi.sum(axis=-1) * self.grid.dr

    def potentials(self, memory, x):
        """Per-threshold ``(psi, Psi)`` arrays for a memory array."""
        x = np.asarray(x, dtype=float)
        r = self.grid.nodes
        return self.density.psi(x[..., None], r, memory), self.density.Psi(x[..., None], r, memory)

    def step(self, memory, u, x):
        new = self.update(memory, u)
        return self.output(new, x), new

    def slopes(self, memory, u, x, direction):
        """One-sided branch slopes ``dG/du`` at ``u`` starting from ``memory``.

        Thresholds whose play sits on the edge of the dead zone in the
        requested direction (within ``ENGAGE_TOL * max(1, |w|)``) contribute
        ``rho(x, r, xi) dr``; the sum is multiplied by ``g'(u)`` for GPI forms.
        """
        w = self.input_map(u)
        r = self.grid.nodes
        tol = ENGAGE_TOL * np.maximum(1.0, np.abs(w))[..., None]
        if direction > 0:
            edge = w[..., None] - r
            engaged = edge >= np.asarray(memory) - tol
        else:
            edge = w[..., None] + r
            engaged = edge <= np.asarray(memory) + tol
        x = np.asarray(x, dtype=float)
        rho = self.density(x[..., None], r, edge)
        s = np.where(engaged, rho, 0.0).sum(axis=-1) * self.grid.dr
        return s * self.input_slope(u)


def preisach_output(memory_row, x, op: PreisachOperator) -> float:
    """Preisach output ``G_bar + sum_j psi(x, r_j, xi_j) dr`` for one node."""
    memory_row = np.asarray(memory_row, dtype=float)
    if memory_row.shape != (op.grid.count,):
        raise ConfigurationError(
            f"memory row of shape {memory_row.shape} does not match {op.grid.count} thresholds")
    return float(op.output(memory_row[None, :], np.array([x]))[0])


def preisach_step(u_new, memory_row, x, op: PreisachOperator):
    """Feed ``u_new`` to every play of one node; return ``(s_new, memory_new)``."""
    if abs(u_new) > op.u_limit * (1 + 1e-9) + 1e-12:
        raise RangeError(f"input {u_new:.6g} exceeds operator range {op.u_limit:.6g}")
    memory_row = np.asarray(memory_row, dtype=float)
    if memory_row.shape != (op.grid.count,):
        raise ConfigurationError("memory row does not match the threshold grid")
    new = op.update(memory_row[None, :], np.array([u_new]))
    s = op.output(new, np.array([x]))
    return float(s[0]), new[0]


def branch_slope(memory_row, u, direction, op: PreisachOperator, x=0.0) -> float:
    """One-sided derivative of the Preisach branch through ``memory_row`` at ``u``."""
    direction = 1 if direction > 0 else -1
    memory_row = np.asarray(memory_row, dtype=float)
    return float(op.slopes(memory_row[None, :], np.array([u]), np.array([x]), direction)[0])


def saturation_range_check(op: PreisachOperator, xs=(0.0,), U: Optional[float] = None) -> dict:
    """Check ``int int rho(x,r,+-v) dv dr`` against ``1 - G_bar`` and ``G_bar``.

    Integrals run over the density's declared support (infinite supports are
    cut at the threshold grid bound). When ``U`` is given, the integral over
    the reachable triangle ``{0 < v < U - r}`` is reported as well.
    """
    dens = op.density
    r_hi = op.grid.lambda_max if math.isinf(dens.r_extent) else dens.r_extent
    v_hi = dens.v_extent if not math.isinf(dens.v_extent) else op.grid.lambda_max
    items = []
    ok = True
    for x in xs:
        pos, _ = integrate.quad(lambda r: float(dens.psi(x, r, v_hi)), 0.0, r_hi, limit=200)
        neg, _ = integrate.quad(lambda r: -float(dens.psi(x, r, -v_hi)), 0.0, r_hi, limit=200)
        item = {"x": float(x), "positive": pos, "negative": neg,
                "positive_bound": 1.0 - op.offset, "negative_bound": op.offset,
                "pass": bool(pos <= 1.0 - op.offset + 1e-12 and neg <= op.offset + 1e-12)}
        if U is not None:
            rpos, _ = integrate.quad(lambda r: float(dens.psi(x, r, max(U - r, 0.0))), 0.0, U, limit=200)
            rneg, _ = integrate.quad(lambda r: -float(dens.psi(x, r, -max(U - r, 0.0))), 0.0, U, limit=200)
            item["reachable_positive"] = rpos
            item["reachable_negative"] = rneg
            item["reachable_pass"] = bool(rpos <= 1.0 - op.offset + 1e-12 and rneg <= op.offset + 1e-12)
        ok = ok and item["pass"]
        items.append(item)
    return {"pass": ok, "points": items}


def check_memory(memory, grid: ThresholdGrid, u=None, U: Optional[float] = None) -> dict:
    """Largest violations of the memory-state invariants (all zero when valid)."""
    memory = np.atleast_2d(np.asarray(memory, dtype=float))
    r = grid.nodes
    out = {"lipschitz": float(max(0.0, (np.abs(np.diff(memory, axis=-1)) - grid.dr).max(initial=0.0)))}
    if u is not None:
        gap = np.abs(np.asarray(u, dtype=float)[:, None] - memory) - r
        out["admissibility"] = float(max(0.0, gap.max()))
    if U is not None:
        out["support"] = float(max(0.0, (np.abs(memory) - np.maximum(U - r, 0.0)).max()))
    return out


def loaded_memory(u0, grid: ThresholdGrid, start=0.0):
    """Memory of a virgin state driven monotonically to ``start`` and then to ``u0``.

    ``start = 0`` gives the loaded state ``clip(0, u0 - r, u0 + r)``.
    """
    u0 = np.asarray(u0, dtype=float)
    r = grid.nodes
    start = np.broadcast_to(np.asarray(start, dtype=float), u0.shape)
    base = np.sign(start)[:, None] * np.maximum(np.abs(start)[:, None] - r, 0.0)
    return np.minimum(u0[:, None] + r, np.maximum(u0[:, None] - r, base))
