"""P1 finite elements with mass lumping on a uniform 1-D mesh.

Each time step leads to a tridiagonal system

    (m_k / tau) (G_k(u) - s_prev_k) + (K(s) u)_k + robin_k(u) = 0,

where the hysteresis term is linearized nodewise as ``slope_k u_k + intercept_k``
and the permeability of element ``e`` is ``kappa(x_mid, (s_k + s_{k+1}) / 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, SingularSystemError


@dataclass(frozen=True)
class Mesh1D:
    length: float
    n: int

    def __post_init__(self):
        if not self.length > 0:
            raise ConfigurationError("mesh length must be positive")
        if int(self.n) < 2:
            raise ConfigurationError("mesh needs at least two nodes")

    @property
    def h(self) -> float:
        return self.length / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        x = np.linspace(0.0, self.length, self.n)
        x[-1] = self.length
        return x

    @property
    def midpoints(self) -> np.ndarray:
        x = self.nodes
        return 0.5 * (x[:-1] + x[1:])

    @property
    def lumped_mass(self) -> np.ndarray:
        m = np.full(self.n, self.h)
        m[0] = m[-1] = 0.5 * self.h
        return m


@dataclass(frozen=True)
class MaterialLaws:
    """Permeability, boundary permeabilities and boundary pressure.

    ``u_star(t)`` returns the pair ``(left, right)`` of boundary pressures.
    """

    kappa: Callable
    kappa_star: float
    kappa_sup: float
    kappa_bar: float
    gamma_left: float
    gamma_right: float
    u_star: Callable
    U_star: float

    def check(self, length: float, times, s_range=(-2.0, 2.0), samples: int = 41) -> list:
        """Spot-check the permeability and boundary hypotheses; returns violation strings."""
        out = []
        xs = np.linspace(0.0, length, samples)
        ss = np.linspace(s_range[0], s_range[1], samples)
        X, S = np.meshgrid(xs, ss, indexing="ij")
        k = np.asarray(self.kappa(X, S), dtype=float) * np.ones_like(X)
        if not self.kappa_star > 0:
            out.append("hy2: kappa lower bound must be positive")
        if k.min() < self.kappa_star * (1 - 1e-12):
            out.append(f"hy2: kappa below its lower bound ({k.min():.6g} < {self.kappa_star:.6g})")
        if k.max() > self.kappa_sup * (1 + 1e-12):
            out.append(f"hy2: kappa above its upper bound ({k.max():.6g} > {self.kappa_sup:.6g})")
        dx, ds = xs[1] - xs[0], ss[1] - ss[0]
        lip = max(np.abs(np.diff(k, axis=0)).max() / dx if dx > 0 else 0.0,
                  np.abs(np.diff(k, axis=1)).max() / ds)
        if lip > self.kappa_bar * (1 + 1e-6) + 1e-12:
            out.append(f"hy2: kappa Lipschitz constant {lip:.6g} exceeds {self.kappa_bar:.6g}")
        if self.gamma_left < 0 or self.gamma_right < 0:
            out.append("hy2: gamma must be nonnegative")
        if self.gamma_left + self.gamma_right <= 0:
            out.append("hy2: gamma integral zero")
        ust = np.array([self.u_star(t) for t in times], dtype=float)
        if ust.size and np.abs(ust).max() > self.U_star * (1 + 1e-12):
            out.append(f"hy2: |u*| reaches {np.abs(ust).max():.6g} > U* = {self.U_star:.6g}")
        return out


@dataclass(frozen=True)
class TridiagonalSystem:
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    rhs: np.ndarray

    @property
    def n(self) -> int:
        return self.diag.size

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.lower, -1) + np.diag(self.upper, 1)

    def matvec(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        out = self.diag * u
        out[1:] += self.lower * u[:-1]
        out[:-1] += self.upper * u[1:]
        return out


def element_permeability(mesh: Mesh1D, kappa: Callable, s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    return np.asarray(kappa(mesh.midpoints, 0.5 * (s[:-1] + s[1:])), dtype=float) * np.ones(mesh.n - 1)


def stiffness_apply(mesh: Mesh1D, kappa_e, u) -> np.ndarray:
    """``K u`` for the P1 stiffness with element permeabilities ``kappa_e``."""
    flux = kappa_e * np.diff(u) / mesh.h
    out = np.zeros(mesh.n)
    out[:-1] -= flux
    out[1:] += flux
    return out


def assemble_step_system(mesh: Mesh1D, laws: MaterialLaws, s_field, s_prev, u_star_now,
                         tau: float, hysteresis_linearization=None,
                         check: bool = True) -> TridiagonalSystem:
    """Assemble the linearized step system.

    ``hysteresis_linearization`` is a pair ``(slopes, intercepts)`` such that
    ``G_k(u) ~ slopes_k u + intercepts_k``; ``None`` drops the hysteresis term.
    Pass ``check=False`` to skip the diagonal-dominance assertion.
    """
    if not tau > 0:
        raise ConfigurationError("time step must be positive")
    s_field = np.asarray(s_field, dtype=float)
    s_prev = np.asarray(s_prev, dtype=float)
    if s_field.shape != (mesh.n,) or s_prev.shape != (mesh.n,):
        raise ConfigurationError("saturation fields do not match the mesh")
    m = mesh.lumped_mass
    if hysteresis_linearization is None:
        slopes = np.zeros(mesh.n)
        intercepts = s_prev.copy()
    else:
        slopes, intercepts = (np.asarray(a, dtype=float) for a in hysteresis_linearization)
        if slopes.shape != (mesh.n,) or intercepts.shape != (mesh.n,):
            raise ConfigurationError("hysteresis linearization does not match the mesh")
        if np.any(slopes < 0):
            raise ConfigurationError("hysteresis slopes must be nonnegative")

    ke = element_permeability(mesh, laws.kappa, s_field) / mesh.h
    diag = m * slopes / tau
    diag[:-1] += ke
    diag[1:] += ke
    off = -ke
    rhs = m * (s_prev - intercepts) / tau
    uL, uR = u_star_now
    diag[0] += laws.gamma_left
    diag[-1] += laws.gamma_right
    rhs[0] += laws.gamma_left * uL
    rhs[-1] += laws.gamma_right * uR

    system = TridiagonalSystem(off.copy(), diag, off.copy(), rhs)
    if check:
        offsum = np.zeros(mesh.n)
        offsum[1:] += np.abs(system.lower)
        offsum[:-1] += np.abs(system.upper)
        if np.any(diag <= 0) or np.any(diag < offsum * (1 - 1e-12)):
            raise ConfigurationError("assembled system is not diagonally dominant")
    return system


def solve_tridiagonal(system: TridiagonalSystem) -> np.ndarray:
    """Thomas algorithm; raises :class:`SingularSystemError` on a zero pivot."""
    a = system.lower.tolist()
    b = system.diag.tolist()
    c = system.upper.tolist()
    d = system.rhs.tolist()
    n = len(b)
    cp = [0.0] * n
    dp = [0.0] * n
    scale = max(abs(v) for v in b) or 1.0
    piv = b[0]
    if abs(piv) <= 1e-14 * scale:
        raise SingularSystemError("zero pivot in row 0")
    cp[0] = c[0] / piv if n > 1 else 0.0
    dp[0] = d[0] / piv
    for i in range(1, n):
        piv = b[i] - a[i - 1] * cp[i - 1]
        if abs(piv) <= 1e-14 * scale:
            raise SingularSystemError(f"zero pivot in row {i}")
        cp[i] = c[i] / piv if i < n - 1 else 0.0
        dp[i] = (d[i] - a[i - 1] * dp[i - 1]) / piv
    x = [0.0] * n
    x[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return np.array(x)


def discrete_divergence(mesh: Mesh1D, laws: MaterialLaws, s, u, u_star_now) -> np.ndarray:
    """Nodal ``div(kappa grad u)`` from the same P1 operator used in assembly.

    Boundary rows include the Robin flux, so the value at an endpoint is the
    one a backward step would need to balance.
    """
    ke = element_permeability(mesh, laws.kappa, s)
    val = -stiffness_apply(mesh, ke, np.asarray(u, dtype=float))
    uL, uR = u_star_now
    val[0] -= laws.gamma_left * (u[0] - uL)
    val[-1] -= laws.gamma_right * (u[-1] - uR)
    return val / mesh.lumped_mass
