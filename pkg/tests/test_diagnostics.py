import dataclasses
import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from hystersolve import diagnostics as diag
from hystersolve.scenarios import ramp_config, steady_config
from hystersolve.stepper import run_simulation


def small(cfg, **kw):
    base = {"mesh.nodes": 21, "time.steps": 20, "preisach.thresholds": 64}
    base.update(kw)
    return cfg.replace(**base)


def fake(values, tau, mass=(1.0,)):
    v = np.asarray(values, dtype=float)
    mesh = SimpleNamespace(lumped_mass=np.asarray(mass, dtype=float))
    return SimpleNamespace(field=lambda name: v, tau=tau, steps=v.shape[0] - 1,
                           problem=SimpleNamespace(mesh=mesh))


@pytest.mark.parametrize("tau", [0.01, 0.3])
@pytest.mark.parametrize("w", [-2.0, -1e-3, 1e-6, 0.05, 1.7])
def test_F_and_Gamma_against_quadrature(tau, w):
    F_num, _ = quad(lambda v: diag.f_conv(v, tau), 0, w, epsabs=1e-15, epsrel=1e-13)
    assert diag.F_conv(w, tau) == pytest.approx(F_num, rel=1e-9, abs=1e-18)
    G_ref = abs(w) * (w * diag.f_conv(w, tau) - F_num)
    assert diag.Gamma_conv(w, tau) == pytest.approx(G_ref, rel=1e-8, abs=1e-18)


@given(st.floats(1e-4, 1.0), st.floats(0, 50))
def test_Gamma_lower_bound(tau, extra):
    w = tau * (math.e**2 - 1) * (1 + extra)
    assert diag.Gamma_conv(w, tau) >= 0.5 * tau * w * math.log1p(w / tau) * (1 - 1e-12)


def test_alpha_examples():
    assert diag.alpha_tau(0.01, 1.0) == pytest.approx(math.log(3) / math.log(11), abs=1e-12)
    assert diag.alpha_tau(0.01, 1.0) == pytest.approx(0.4582, abs=1e-4)
    seq = [diag.alpha_tau(10.0**-k, 1.0) for k in range(1, 12)]
    assert all(b < a for a, b in zip(seq[:-1], seq[1:]))
    assert seq[-1] == pytest.approx(math.log(3) / math.log1p(10**5.5))
    assert diag.alpha_tau_sweep(0.05, 1.0)["holds"]
    for bad in (0.0, 1.0, -0.5):
        with pytest.raises(ValueError):
            diag.alpha_tau(bad, 1.0)


@given(st.floats(1e-6, 0.99), st.floats(0.01, 100))
def test_alpha_dominates_sampled_ratio(tau, U):
    assert diag.alpha_tau_sweep(tau, U, samples=500)["holds"]


def test_convexity_monotone_and_constant():
    unit = lambda r: np.ones_like(r)
    rep = diag.convexity_inequality_check(unit, np.linspace(0, 1, 30), 0.0, 0.01)
    assert rep["lhs"] >= 0 and rep["positive"]
    rep = diag.convexity_inequality_check(unit, np.full(10, 0.4), 0.4, 0.01)
    assert rep["lhs"] == 0.0 and rep["rhs_base"] == 0.0 and rep["beta_hat"] == math.inf
    with pytest.raises(ValueError):
        diag.convexity_inequality_check(lambda r: r - 0.5, [0.1, 0.2], 0.0, 0.01)


def test_convexity_outputs_match_closed_form():
    # loading from zero with unit density: P = w^2 / 2
    w = np.array([0.2, 0.5, 0.9])
    rep = diag.convexity_inequality_check(lambda r: np.ones_like(r), w, 0.0, 0.01, thresholds=4096)
    assert np.allclose(rep["outputs"][1:], w**2 / 2, atol=1e-7)


def test_convexity_random_sequences():
    rng = np.random.default_rng(11)
    table = (np.linspace(0, 1, 9), rng.uniform(0.5, 2.0, 9))
    for _ in range(50):
        w = rng.uniform(-1, 1, int(rng.integers(2, 40)))
        rep = diag.convexity_inequality_check(table, w, rng.uniform(-1, 1), 0.01)
        assert rep["beta_hat"] > 0


def test_philog_sum_single_node():
    n, tau = 40, 0.025
    traj = fake(np.arange(n + 1)[:, None] * tau, tau)
    assert diag.philog_increment_sum(traj) == pytest.approx(n * tau * math.log(2), rel=1e-14)
    assert diag.philog_increment_sum(fake(np.ones((5, 1)), 0.1)) == 0.0


def test_gaps_examples():
    assert diag.interpolant_gap(fake(np.ones((6, 2)), 0.1, (0.5, 0.5))) == (0.0, 0.0)
    one = fake([[0.0, 0.1], [0.3, 0.5]], 1.0, (0.5, 0.5))
    gu, gs = diag.interpolant_gap(one)
    expected = 0.5 * (0.3 * math.log1p(0.3) + 0.4 * math.log1p(0.4))
    assert gu == pytest.approx(expected) and gs == pytest.approx(expected)


def test_steady_suite_and_weak_residual():
    traj = run_simulation(small(steady_config(0.3)))
    reps = {r.name: r for r in diag.run_estimate_suite(traj)}
    assert all(r.status == "pass" for r in reps.values())
    for name in ("mass_balance", "philog_increment_sum", "interpolant_gap_u", "weak_residual"):
        assert reps[name].measured <= 1e-12
    zero = diag.weak_residual(traj, sigma=np.zeros(traj.steps + 1), sigma_dot=np.zeros(traj.steps + 1))
    assert zero == 0.0
    with pytest.raises(ValueError):
        diag.weak_residual(traj, sigma=lambda t: 1.0 + 0 * t)


def test_ramp_suite_passes_and_corruption_is_caught():
    traj = run_simulation(small(ramp_config()))
    reps = diag.run_estimate_suite(traj)
    assert diag.hard_failures(reps) == []
    names = [r.name for r in reps]
    assert len(names) == len(set(names)) >= 10
    for r in reps:
        d = r.to_dict()
        assert d["status"] in ("pass", "fail") and "context" in d

    bad = dataclasses.replace(traj, states=[dataclasses.replace(s, u=10 * s.u) for s in traj.states])
    failed = {r.name for r in diag.hard_failures(diag.run_estimate_suite(bad))}
    assert "max_principle" in failed


def test_philog_norm_implication_on_ramp():
    traj = run_simulation(small(ramp_config()))
    lhs = diag.time_derivative_norm_integral(traj)
    assert lhs <= diag.philog_increment_sum(traj) + traj.problem.mesh.length
