"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected and repeated in the pytest terminal summary.
Run ``python tests/test_acceptance.py`` to execute the gate without pytest.
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from hystersolve import diagnostics as diag
from hystersolve.hysteresis import ConstantDensity, PreisachOperator, ThresholdGrid, loaded_memory, \
    play_update, preisach_output
from hystersolve.scenarios import ramp_config, random_config
from hystersolve.spaces import (SampledFunction, exp_minus_linear, holder_pairing_check,
                                luxemburg_norm, philog, philog_equivalence_check, power)
from hystersolve.stepper import mass_residual, mass_scale, run_simulation
from hystersolve.study import refinement_study

RESULTS = {}


def record(number, ok, detail):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[number] = line
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def suite_runs():
    return [run_simulation(random_config(seed)) for seed in range(20)]


@pytest.fixture(scope="module")
def ramp_levels():
    return {n: run_simulation(ramp_config().replace(**{"time.steps": n})) for n in (100, 200, 400)}


def test_criterion_01_play_variational_inequality():
    rng = np.random.default_rng(1)
    n = 100_000
    u = rng.uniform(-2, 2, n)
    xi_prev = rng.uniform(-2, 2, n)
    r = rng.uniform(0, 1.5, n)
    r[:1000] = 0.0
    xi = play_update(u, xi_prev, r)
    tol = 1e-12
    first = np.abs(u - xi) > r + tol
    # grid scan over z in [-r, r], endpoints included
    z = r[:, None] * np.linspace(-1.0, 1.0, 41)[None, :]
    prod = (xi - xi_prev)[:, None] * ((u - xi)[:, None] - z)
    second = prod.min(axis=1) < -tol
    bad = int(np.count_nonzero(first | second))
    record(1, bad == 0, f"{n} triples, {bad} violations of the play inequality (tol {tol:g})")


def test_criterion_02_preisach_quadrature_order():
    counts = [32, 64, 128, 256]
    # kink of max(0.5 - r, 0) a third of a cell inside the grid for every count
    lam = 48.0 / 49.0
    errors = []
    for N in counts:
        grid = ThresholdGrid(N, lam)
        op = PreisachOperator(grid, ConstantDensity(1.0))
        mem = loaded_memory(np.array([0.5]), grid, 0.0)[0]
        errors.append(abs(preisach_output(mem, 0.0, op) - 0.125))
    orders = [math.log2(a / b) for a, b in zip(errors[:-1], errors[1:])]
    C = max(e / (lam / N) ** 2 for e, N in zip(errors, counts))
    aligned = []
    for N in counts:
        grid = ThresholdGrid(N, 1.0)
        op = PreisachOperator(grid, ConstantDensity(1.0))
        aligned.append(abs(preisach_output(loaded_memory(np.array([0.5]), grid, 0.0)[0], 0.0, op) - 0.125))
    ok = min(orders) >= 1.9 and max(aligned) <= 1e-15
    record(2, ok, f"errors {', '.join(f'{e:.2e}' for e in errors)}, orders "
                  f"{', '.join(f'{o:.3f}' for o in orders)}, C = {C:.3f}; "
                  f"cell-aligned kink error {max(aligned):.1e}")


def test_criterion_03_max_principle(suite_runs):
    worst = -math.inf
    for traj in suite_runs:
        bound = traj.problem.U + 10 * traj.solver.tol
        worst = max(worst, float(np.abs(traj.field("u")).max()) - bound)
    record(3, worst <= 0, f"20 randomized runs, max(max|u| - bound) = {worst:.3e}")


def test_criterion_04_mass_balance(suite_runs):
    worst = 0.0
    for traj in suite_runs:
        prob = traj.problem
        limit = 10 * traj.solver.tol * mass_scale(prob)
        for prev, st in zip(traj.states[:-1], traj.states[1:]):
            res = abs(mass_residual(prob, prev, st, prob.boundary[st.index]))
            worst = max(worst, res / limit)
    record(4, worst <= 1.0, f"largest residual / (10 tol scale) = {worst:.3e} over all steps")


def test_criterion_05_dissipation(suite_runs):
    total = sum(diag.dissipation_violations(traj)[0] for traj in suite_runs)
    record(5, total == 0, f"{total} per-threshold violations beyond 1e-12 scaled")


def test_criterion_06_uniform_bounds(ramp_levels):
    e = {n: diag.energy_sum(t) for n, t in ramp_levels.items()}
    p = {n: diag.philog_increment_sum(t) for n, t in ramp_levels.items()}
    ok = all(e[n] <= 3 * e[100] and p[n] <= 3 * p[100] for n in e)
    record(6, ok, "energy " + ", ".join(f"{e[n]:.4f}" for n in e)
           + "; philog " + ", ".join(f"{p[n]:.4f}" for n in p) + " (n = 100, 200, 400)")


def test_criterion_07_convexity_inequality():
    rng = np.random.default_rng(7)
    tau = 0.01
    betas = []
    for _ in range(1000):
        w = rng.uniform(-1, 1, int(rng.integers(2, 41)))
        if rng.random() < 0.2:
            w = np.cumsum(rng.uniform(-0.1, 0.1, w.size)).clip(-1, 1)
        rep = diag.convexity_inequality_check(lambda r: np.ones_like(r), w, float(rng.uniform(-1, 1)), tau)
        betas.append(rep["beta_hat"])
    # closed forms against quadrature of f and of w f'(w)
    err = 0.0
    for w in np.concatenate([-np.geomspace(1e-6, 2, 40), np.geomspace(1e-6, 2, 40)]):
        F_ref, _ = quad(lambda v: v / (tau + abs(v)), 0, w, epsabs=0, epsrel=1e-13, limit=200)
        wf_minus_F, _ = quad(lambda v: v * tau / (tau + abs(v)) ** 2, 0, w, epsabs=0, epsrel=1e-13, limit=200)
        G_ref = abs(w) * wf_minus_F
        err = max(err, abs(diag.F_conv(w, tau) - F_ref) / abs(F_ref),
                  abs(diag.Gamma_conv(w, tau) - G_ref) / abs(G_ref))
    ok = min(betas) > 0 and err <= 1e-10
    record(7, ok, f"1000 sequences, min beta_hat = {min(betas):.4f}; F, Gamma relative error {err:.1e}")


def test_criterion_08_alpha_bound():
    sweeps = [diag.alpha_tau_sweep(tau, 1.0, samples=10_000) for tau in (0.1, 0.01, 0.001)]
    a = diag.alpha_tau(0.01, 1.0)
    ok = all(s["holds"] for s in sweeps) and abs(a - 0.4582) <= 1e-3
    record(8, ok, "max ratio / alpha: " + ", ".join(f"{s['max_ratio']:.4f}/{s['alpha']:.4f}" for s in sweeps)
           + f"; alpha(0.01, 1) = {a:.4f}")


def test_criterion_09_orlicz_toolkit():
    rng = np.random.default_rng(9)
    lp_err = 0.0
    for _ in range(100):
        p = float(rng.uniform(1.1, 6.0))
        k = int(rng.integers(1, 60))
        f = SampledFunction(rng.normal(size=k) * rng.uniform(0.01, 100), rng.uniform(0.01, 1, k))
        lp = float(np.dot(f.weights, np.abs(f.values) ** p) ** (1 / p))
        lp_err = max(lp_err, abs(luxemburg_norm(f, power(p)) - lp) / lp)

    young_bad = 0
    for phi in (power(2.0), power(3.0), philog(), exp_minus_linear()):
        u = rng.uniform(0, 10, 10_000)
        v = rng.uniform(0, 5, 10_000)
        with np.errstate(over="ignore"):
            rhs = phi(u) + phi.conjugate_value(v)
        young_bad += int(np.count_nonzero(u * v > rhs * (1 + 1e-12) + 1e-12))

    holder_bad = 0
    phis = (philog(), power(2.0), exp_minus_linear())
    for i in range(10_000):
        k = int(rng.integers(1, 9))
        f = SampledFunction.piecewise_constant(rng.normal(size=k) * rng.uniform(0.1, 5), 1.0)
        g = SampledFunction.piecewise_constant(rng.normal(size=k) * rng.uniform(0.1, 5), 1.0)
        holder_bad += not holder_pairing_check(f, g, phis[i % 3])["holds"]

    chain = philog_equivalence_check(np.geomspace(1e-8, 1e8, 10_001))
    ok = lp_err <= 1e-12 and young_bad == 0 and holder_bad == 0 and chain["holds"]
    record(9, ok, f"Lp relative error {lp_err:.1e}; Young violations {young_bad}; "
                  f"Hoelder violations {holder_bad}; Phi <= Phi_log <= 2 Phi violations {chain['violations']}")


def test_criterion_10_convergence_diagnostics():
    study = refinement_study(ramp_config(), 3)
    c = study["checks"]
    y = [d["y_norm"] for d in study["differences"]]
    wr = [lv["weak_residual"] for lv in study["levels"]]
    ratio = [lv["gap_u"] / lv["alpha"] for lv in study["levels"]]
    ok = c["y_norm_decreasing"] and c["gap_below_fitted_alpha"] and c["weak_residual_decreasing"]
    record(10, ok, "Y diffs " + ", ".join(f"{v:.3e}" for v in y)
           + "; gap_u/alpha " + ", ".join(f"{v:.3e}" for v in ratio)
           + "; weak residual " + ", ".join(f"{v:.3e}" for v in wr))


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q"]))
