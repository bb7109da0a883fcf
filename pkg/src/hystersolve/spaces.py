"""Young functions, Luxemburg norms and Fourier-based Sobolev-type norms.

A Young function is ``Phi(u) = int_0^u phi``, with ``phi`` increasing from
zero. Its conjugate is evaluated as ``Phi*(v) = v phi^-1(v) - Phi(phi^-1(v))``.

Time norms use the Dirichlet sine basis ``l_j(t) = sqrt(2/T) sin(j pi t/T)``
with eigenvalues ``mu_j = (j pi / T)^2``; space norms use the Neumann cosine
basis of ``(0, L)`` with ``omega_k = (k pi / L)^2``.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import fft

LUX_ROUNDS = 60


# ---------------------------------------------------------------------------
# Young functions
# ---------------------------------------------------------------------------

def _invert_increasing(f: Callable, v, rounds: int = 200):
    """Solve ``f(u) = v`` for increasing ``f`` with ``f(0) = 0`` by bisection."""
    v = np.asarray(v, dtype=float)
    lo = np.zeros_like(v)
    hi = np.maximum(v, 1.0)
    for _ in range(2000):
        short = (f(hi) < v) & (hi < 1e300)
        if not short.any():
            break
        hi = np.where(short, 2.0 * hi, hi)
    for _ in range(rounds):
        mid = 0.5 * (lo + hi)
        below = f(mid) < v
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 4e-16 * np.maximum(hi, 1e-300)):
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class YoungFunction:
    """A Young function given by ``Phi``, its generator ``phi`` and ``phi^-1``.

    Build instances with :func:`power`, :func:`exp_minus_linear`,
    :func:`philog`, :func:`custom` or :meth:`conjugate`.
    """

    kind: str
    Phi: Callable
    phi: Callable
    phi_inv: Callable
    conj: Optional[Callable] = None   # closed-form conjugate, if known
    label: str = ""

    def __call__(self, u):
        return self.Phi(np.asarray(u, dtype=float))

    def conjugate_value(self, v):
        v = np.asarray(v, dtype=float)
        if np.any(v < 0):
            raise ValueError("conjugate is evaluated at nonnegative arguments only")
        if self.conj is not None:
            return self.conj(v)
        with np.errstate(over="ignore", invalid="ignore"):
            u = self.phi_inv(v)
            out = v * u - self.Phi(u)
        return np.where(np.isfinite(out), np.maximum(out, 0.0), np.inf)

    def conjugate(self) -> "YoungFunction":
        """``Phi*`` as a Young function (generator ``phi^-1``)."""
        base = self
        return YoungFunction(f"conjugate({self.kind})", base.conjugate_value, base.phi_inv, base.phi,
                             conj=base.Phi, label=f"{self.label}*")

    def check(self, samples=None) -> dict:
        """Sampled checks of convexity, ``Phi(0) = 0`` and the strict growth at 0 and infinity."""
        u = np.geomspace(1e-6, 1e6, 241) if samples is None else np.asarray(samples, dtype=float)
        vals = self.Phi(u)
        ratio = vals / u
        lin = np.linspace(0.0, 10.0, 201)
        second = np.diff(self.Phi(lin), 2)
        return {
            "zero": float(self.Phi(np.array(0.0))),
            "convex": bool(np.all(second >= -1e-12 * np.maximum(1.0, np.abs(self.Phi(lin[1:-1]))))),
            "ratio_small": float(ratio[0]),
            "ratio_large": float(ratio[-1]),
            # Phi(u)/u small near 0 and large near infinity, relative to the middle sample
            "strict": bool(ratio[0] < 1e-2 * ratio[len(ratio) // 2] and ratio[-1] > 10.0 * ratio[len(ratio) // 2]),
        }


def power(p: float, coef: float = 1.0) -> YoungFunction:
    """``Phi(u) = coef * u^p`` with ``p > 1``."""
    if not p > 1 or not coef > 0:
        raise ValueError("power Young function needs p > 1 and a positive coefficient")
    q = p / (p - 1.0)

    def conj(v):
        # sup_u (uv - c u^p) = (p - 1) c (v / (c p))^q
        return (p - 1.0) * coef * (np.asarray(v) / (coef * p)) ** q

    return YoungFunction(
        "power",
        lambda u: coef * np.abs(u) ** p,
        lambda u: coef * p * np.abs(u) ** (p - 1.0),
        lambda v: (np.asarray(v) / (coef * p)) ** (1.0 / (p - 1.0)),
        conj=conj,
        label=f"power({p:g})" if coef == 1.0 else f"power({p:g},{coef:g})",
    )


def _exp_minus_linear_Phi(u):
    u = np.abs(np.asarray(u, dtype=float))
    small = u < 1e-3
    us = np.where(small, u, 0.0)
    series = us**2 / 2 - us**3 / 6 + us**4 / 12 - us**5 / 20
    return np.where(small, series, (1.0 + u) * np.log1p(u) - u)


def _exp_minus_linear_conj(v):
    v = np.asarray(v, dtype=float)
    small = v < 1e-3
    vs = np.where(small, v, 0.0)
    series = vs**2 / 2 + vs**3 / 6 + vs**4 / 24 + vs**5 / 120
    return np.where(small, series, np.expm1(v) - v)


def exp_minus_linear() -> YoungFunction:
    """``Phi(u) = (1+u) log(1+u) - u``, conjugate ``e^v - v - 1``."""
    return YoungFunction("exp_minus_linear", _exp_minus_linear_Phi,
                         lambda u: np.log1p(np.abs(u)), lambda v: np.expm1(v),
                         conj=_exp_minus_linear_conj, label="exp_minus_linear")


def _philog_phi(u):
    u = np.abs(np.asarray(u, dtype=float))
    return np.log1p(u) + u / (1.0 + u)


def _philog_phi_inv(v):
    """Inverse of the Phi_log generator by Newton in ``y = log(1+u)``.

    There the generator is ``y + 1 - e^-y``: concave with slope in ``(1, 2]``,
    so the iteration from ``y = v/2`` increases monotonically to the root.
    """
    v = np.asarray(v, dtype=float)
    y = 0.5 * v
    for _ in range(60):
        step = (v - (y - np.expm1(-y))) / (1.0 + np.exp(-y))
        y = y + step
        if np.all(np.abs(step) <= 4e-16 * np.maximum(y, 1e-300)):
            break
    with np.errstate(over="ignore"):
        return np.expm1(y)


def philog() -> YoungFunction:
    """``Phi_log(v) = v log(1+v)``."""
    return YoungFunction("philog", lambda u: np.abs(u) * np.log1p(np.abs(u)), _philog_phi,
                         _philog_phi_inv, label="philog")


def custom(u_nodes, phi_values, label: str = "custom") -> YoungFunction:
    """Young function from a tabulated increasing generator ``phi``.

    ``phi`` is interpolated linearly (and extended with the last slope);
    ``Phi`` is its exact integral and ``phi^-1`` is found by bisection.
    """
    un = np.asarray(u_nodes, dtype=float)
    pv = np.asarray(phi_values, dtype=float)
    if un.ndim != 1 or un.shape != pv.shape or un.size < 2:
        raise ValueError("generator table needs matching 1-D node and value arrays")
    if un[0] != 0.0 or pv[0] != 0.0:
        raise ValueError("generator table must start at phi(0) = 0")
    if np.any(np.diff(un) <= 0) or np.any(np.diff(pv) <= 0):
        raise ValueError("generator table must be strictly increasing")
    slope_end = (pv[-1] - pv[-2]) / (un[-1] - un[-2])
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (pv[1:] + pv[:-1]) * np.diff(un))])

    def phi(u):
        u = np.abs(np.asarray(u, dtype=float))
        return np.where(u <= un[-1], np.interp(u, un, pv), pv[-1] + slope_end * (u - un[-1]))

    def Phi(u):
        u = np.abs(np.asarray(u, dtype=float))
        k = np.clip(np.searchsorted(un, u, side="right") - 1, 0, un.size - 1)
        # phi is linear on each cell, so the trapezoid rule is exact
        return cum[k] + 0.5 * (u - un[k]) * (pv[k] + phi(u))

    return YoungFunction("custom", Phi, phi, lambda v: _invert_increasing(phi, v), label=label)


def young_function(name: str) -> YoungFunction:
    """Look up a Young function by name: ``power:p``, ``exp_minus_linear`` or ``philog``."""
    if name.startswith("power"):
        _, _, p = name.partition(":")
        return power(float(p) if p else 2.0)
    if name == "exp_minus_linear":
        return exp_minus_linear()
    if name == "philog":
        return philog()
    raise ValueError(f"unknown Young function {name!r}")


def young_conjugate(phi: YoungFunction, v):
    """``Phi*(v)``; raises ``ValueError`` for negative ``v``."""
    out = phi.conjugate_value(v)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# sampled functions and Luxemburg norms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampledFunction:
    """Sample values with positive quadrature weights summing to the domain measure."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if v.size == 0:
            raise ValueError("sampled function has no samples")
        if v.shape != w.shape:
            raise ValueError("values and weights differ in size")
        if np.any(w <= 0):
            raise ValueError("quadrature weights must be positive")
        if not np.all(np.isfinite(v)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", w)

    @property
    def measure(self) -> float:
        return float(self.weights.sum())

    def integral(self, g=None) -> float:
        vals = self.values if g is None else g(self.values)
        return float(np.dot(self.weights, vals))

    def scaled(self, c: float) -> "SampledFunction":
        return SampledFunction(c * self.values, self.weights)

    @classmethod
    def piecewise_constant(cls, values, length: float) -> "SampledFunction":
        v = np.asarray(values, dtype=float)
        return cls(v, np.full(v.size, length / v.size))

    @classmethod
    def trapezoid(cls, values, length: float) -> "SampledFunction":
        v = np.asarray(values, dtype=float)
        if v.size < 2:
            raise ValueError("trapezoid rule needs at least two samples")
        w = np.full(v.size, length / (v.size - 1))
        w[0] = w[-1] = 0.5 * w[0]
        return cls(v, w)

    @classmethod
    def space_time(cls, field, mass, T: float) -> "SampledFunction":
        """Field of shape ``(n_times, n_nodes)`` with trapezoid-in-time times nodal mass."""
        field = np.asarray(field, dtype=float)
        nt = field.shape[0]
        wt = np.full(nt, T / (nt - 1))
        wt[0] = wt[-1] = 0.5 * wt[0]
        return cls(field, np.outer(wt, mass))


def luxemburg_norm(f: SampledFunction, phi: YoungFunction) -> float:
    """``inf{b > 0 : int Phi(|f| / b) <= 1}``.

    The bracket starts at ``[mean|f| 1e-6, sup|f| measure 1e6]``, is widened
    until it encloses the root, and is then halved geometrically.
    """
    a = np.abs(f.values)
    top = float(a.max())
    if top == 0.0:
        return 0.0
    w = f.weights

    def load(b):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            val = float(np.dot(w, phi.Phi(a / b)))
        return val if np.isfinite(val) else math.inf

    lo = max(float(np.dot(w, a)) / f.measure * 1e-6, 1e-300)
    hi = top * f.measure * 1e6
    while load(hi) > 1.0:
        hi *= 2.0
    tiny = sys.float_info.min
    while lo > tiny and load(lo) <= 1.0:
        lo = max(0.5 * lo, tiny)
    for _ in range(LUX_ROUNDS):
        mid = math.sqrt(lo * hi)
        if load(mid) > 1.0:
            lo = mid
        else:
            hi = mid
    return hi


def holder_pairing_check(f: SampledFunction, g: SampledFunction, phi: YoungFunction) -> dict:
    """``int |fg| <= 2 |f|_Phi |g|_Phi*``."""
    if f.values.shape != g.values.shape or not np.allclose(f.weights, g.weights):
        raise ValueError("functions are not sampled on the same domain")
    pairing = float(np.dot(f.weights, np.abs(f.values * g.values)))
    nf = luxemburg_norm(f, phi)
    ng = luxemburg_norm(g, phi.conjugate())
    bound = 2.0 * nf * ng
    return {"pairing": pairing, "signed_pairing": float(np.dot(f.weights, f.values * g.values)),
            "norm_f": nf, "norm_g_conjugate": ng, "bound": bound,
            "holds": bool(pairing <= bound * (1 + 1e-12) + 1e-300)}


def scaling_bound_check(f: SampledFunction, phi: YoungFunction, a: float) -> dict:
    """``|f|_Phi <= a int Phi(|f|/a)`` whenever ``|f|_Phi >= a``."""
    if not a > 0:
        raise ValueError("a must be positive")
    nf = luxemburg_norm(f, phi)
    if nf < a * (1 - 1e-12):
        return {"applicable": False, "norm": nf, "a": a, "holds": True}
    rhs = a * f.integral(lambda v: phi.Phi(np.abs(v) / a))
    return {"applicable": True, "norm": nf, "a": a, "bound": rhs, "margin": rhs - nf,
            "holds": bool(nf <= rhs * (1 + 1e-12))}


def philog_equivalence_check(u) -> dict:
    """Pointwise ``Phi(u) <= Phi_log(u) <= 2 Phi(u)`` with ``Phi = (1+u)log(1+u) - u``."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("samples must be nonnegative")
    lo = _exp_minus_linear_Phi(u)
    mid = u * np.log1p(u)
    tol = 1e-12 * np.maximum(mid, 1e-300)
    low_ok = lo <= mid + tol
    high_ok = mid <= 2.0 * lo + tol
    pos = lo > 0
    ratio = np.where(pos, mid / np.where(pos, lo, 1.0), np.nan)
    return {"holds": bool(np.all(low_ok & high_ok)),
            "violations": int(np.count_nonzero(~(low_ok & high_ok))),
            "min_ratio": float(np.nanmin(ratio)) if pos.any() else float("nan"),
            "max_ratio": float(np.nanmax(ratio)) if pos.any() else float("nan")}


# ---------------------------------------------------------------------------
# Fourier norms
# ---------------------------------------------------------------------------

def sine_coefficients(v, T: float, axis: int = 0) -> np.ndarray:
    """Coefficients ``int_0^T v l_j dt`` (trapezoid rule), ``j = 1 .. N-1`` for ``N+1`` samples."""
    v = np.moveaxis(np.asarray(v, dtype=float), axis, 0)
    N = v.shape[0] - 1
    if N < 1:
        raise ValueError("need at least two time samples")
    if N == 1:
        return np.zeros((0,) + v.shape[1:])
    dt = T / N
    y = fft.dst(v[1:-1], type=1, axis=0)
    return dt * math.sqrt(2.0 / T) * 0.5 * y


def time_eigenvalues(count: int, T: float) -> np.ndarray:
    j = np.arange(1, count + 1)
    return (np.pi * j / T) ** 2


def sobolev_time_norms(v, T: float = 1.0, modes: Optional[int] = None):
    """``(|v|_H, |v|_V, |v|_V*)`` from the sine coefficients of uniform samples on ``[0, T]``."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise ValueError("need at least two time samples")
    c = sine_coefficients(v, T)
    if modes is not None:
        c = c[:modes]
    mu = time_eigenvalues(c.size, T)
    return (float(math.sqrt(np.sum(c**2))), float(math.sqrt(np.sum(mu * c**2))),
            float(math.sqrt(np.sum(c**2 / mu))))


def cosine_coefficients(u, length: float, axis: int = -1) -> np.ndarray:
    """Coefficients ``int_0^L u e_k dx`` (trapezoid rule) for ``k = 0 .. N-1``."""
    u = np.moveaxis(np.asarray(u, dtype=float), axis, -1)
    N = u.shape[-1] - 1
    if N < 1:
        raise ValueError("need at least two nodes")
    h = length / N
    y = fft.dct(u, type=1, axis=-1)[..., :N]
    scale = np.full(N, math.sqrt(2.0 / length))
    scale[0] = math.sqrt(1.0 / length)
    return h * 0.5 * y * scale


def space_time_norms(u, mesh, T: float):
    """``(||u||_X, ||u||_Y)`` for nodal histories of shape ``(n_times, n_nodes)``.

    ``mesh`` is a :class:`~hystersolve.mesh.Mesh1D` (or any object with
    ``length`` and ``n``).
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[1] != mesh.n:
        raise ValueError(f"field of shape {u.shape} does not match a mesh with {mesh.n} nodes")
    if u.shape[0] < 2:
        raise ValueError("need at least two time samples")
    ck = cosine_coefficients(u, mesh.length)          # (n_times, K)
    cjk = sine_coefficients(ck, T, axis=0)             # (J, K)
    if cjk.size == 0:
        return 0.0, 0.0
    omega = (np.pi * np.arange(cjk.shape[1]) / mesh.length) ** 2
    mu = time_eigenvalues(cjk.shape[0], T)
    X2 = np.sum((1.0 + omega)[None, :] * cjk**2)
    Y2 = np.sum(cjk**2 / mu[:, None])
    return float(math.sqrt(X2)), float(math.sqrt(Y2))
