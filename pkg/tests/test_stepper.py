import numpy as np
import pytest
from scipy.optimize import brentq

from hystersolve.problem import build_problem
from hystersolve.scenarios import quadratic_config, ramp_config, steady_config
from hystersolve.stepper import (Interpolants, SolverSettings, check_initial_compatibility,
                                 initial_state, interpolant_eval, mass_residual, mass_scale,
                                 run_simulation, solve_step)


def small(cfg, **kw):
    base = {"mesh.nodes": 21, "time.steps": 20, "preisach.thresholds": 64}
    base.update(kw)
    return cfg.replace(**base)


def test_steady_state_is_fixed():
    traj = run_simulation(small(steady_config(0.3)))
    for st in traj.states[1:]:
        assert np.array_equal(st.u, traj.states[0].u)
        assert np.array_equal(st.memory, traj.states[0].memory)
        assert st.iterations == 1


def test_two_node_step_matches_scalar_oracle():
    a, b, gl, gr, tau = 0.6, 0.2, 3.0, 1.0, 0.05
    cfg = steady_config(0.0).replace(**{
        "mesh.nodes": 2, "time.steps": 1, "time.final": tau, "preisach.thresholds": 64,
        "laws.gamma_left": gl, "laws.gamma_right": gr,
        "laws.u_star.left0": a, "laws.u_star.right0": b,
    })
    problem = build_problem(cfg)
    r = problem.operator.grid.nodes
    dr = problem.operator.grid.dr
    h = problem.mesh.h
    m = h / 2

    def G(u):
        # loading from virgin memory with unit density
        return np.maximum(u - r, 0.0).sum() * dr

    def u1_of(u0):
        return u0 + h * (m * G(u0) / tau + gl * (u0 - a))

    def eq2(u0):
        u1 = u1_of(u0)
        return m * G(u1) / tau + (u1 - u0) / h + gr * (u1 - b)

    u0 = brentq(eq2, 0.0, 1.0, xtol=1e-15, rtol=1e-15)
    oracle = np.array([u0, u1_of(u0)])
    state = solve_step(initial_state(problem), problem.boundary[1], problem,
                       SolverSettings(tol=1e-12, max_iter=500))
    assert np.all(oracle > 0)
    assert np.allclose(state.u, oracle, rtol=0, atol=1e-8)


def test_boundary_inside_bounds_keeps_max_principle():
    cfg = small(ramp_config())
    traj = run_simulation(cfg)
    bound = max(cfg.laws.u_star_bound, cfg.preisach.lambda_max) + 10 * cfg.solver.tol
    assert max(np.abs(st.u).max() for st in traj.states) <= bound


def test_ramp_wetting_is_monotone():
    traj = run_simulation(small(ramp_config()))
    s = traj.field("s")
    assert np.all(np.diff(s, axis=0) >= -1e-12)
    prob = traj.problem
    scale = mass_scale(prob)
    for prev, st in zip(traj.states[:-1], traj.states[1:]):
        assert abs(mass_residual(prob, prev, st, prob.boundary[st.index])) <= 10 * 1e-10 * scale


def test_solver_reports_iterations_and_residual():
    traj = run_simulation(small(ramp_config()))
    assert all(1 <= r["solver_iters"] <= 200 for r in traj.rows)
    assert all(r["solver_residual"] <= 1e-10 for r in traj.rows)
    assert len(traj.rows) == traj.steps


class _Fake:
    """Minimal trajectory with prescribed values for the interpolant examples."""

    def __init__(self, values, tau):
        self._v = np.asarray(values, dtype=float)
        self.tau = tau
        self.steps = self._v.shape[0] - 1

    def field(self, name):
        return self._v


def test_interpolant_examples():
    fake = _Fake([[0.0], [1.0], [3.0]], 0.5)
    hat = Interpolants(fake, "hat")
    bar = Interpolants(fake, "bar")
    for i, t in enumerate([0.0, 0.5, 1.0]):
        assert hat(0, t) == fake._v[i, 0] and bar(0, t) == fake._v[i, 0]
    assert hat(0, 0.75) == pytest.approx(2.0)
    assert bar(0, 0.75) == 3.0
    assert bar(0, 0.25) == 1.0
    assert hat.derivative(0, 0.75) == pytest.approx(4.0)
    assert interpolant_eval(hat, 0, 0.25) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        hat(0, 1.5)


def test_constant_data_pass_compatibility():
    rep = check_initial_compatibility(small(steady_config(0.3)))
    assert rep["pass"] and not rep["fail"]
    assert {it["name"] for it in rep["items"]} == {"c0", "c0a", "c1", "c2", "c2a", "inim"}


def test_c0_failure_names_location():
    cfg = small(steady_config(0.3))
    problem = build_problem(cfg)
    lam0 = problem.u0.copy()
    lam0[7] += 0.05
    rep = check_initial_compatibility(cfg, problem=problem, lambda0=lam0)
    c0 = next(it for it in rep["items"] if it["name"] == "c0")
    assert c0["status"] == "fail" and rep["fail"]
    assert c0["location"] == pytest.approx(problem.mesh.nodes[7])
    assert c0["measured"] == pytest.approx(0.05)


def test_c0_failure_from_memory_file(tmp_path):
    path = tmp_path / "mem.csv"
    xs = np.linspace(0, 1, 5)
    rs = np.linspace(0, 1, 5)
    lines = ["x,r,lambda"]
    for xv in xs:
        for rv in rs:
            lam = 0.3 + (0.2 if rv == 0 and xv == 0.5 else 0.0)
            lines.append(f"{xv},{rv},{lam}")
    path.write_text("\n".join(lines) + "\n")
    cfg = small(steady_config(0.3)).replace(**{"initial.memory.kind": "csv",
                                               "initial.memory.file": str(path)})
    rep = check_initial_compatibility(cfg)
    c0 = next(it for it in rep["items"] if it["name"] == "c0")
    assert c0["status"] == "fail" and c0["location"] == pytest.approx(0.5)


def test_quadratic_profile_sign_condition():
    cfg = small(quadratic_config())
    rep = check_initial_compatibility(cfg)
    items = {it["name"]: it for it in rep["items"]}
    div = np.array(items["c1"]["div"])
    assert np.all(div[1:-1] > 0)
    assert items["c2"]["status"] == "pass"
    r0 = np.array(items["c1"]["r0"])
    assert np.allclose(r0, np.minimum(cfg.preisach.lambda_max, np.sqrt(np.abs(div))))
    # a memory rising from below has slope -1 and breaks the sign condition
    bad = check_initial_compatibility(cfg.replace(**{"initial.memory.kind": "from_top"}))
    assert next(it for it in bad["items"] if it["name"] == "c2")["status"] == "fail"


def test_incompatible_start_is_refused_without_force():
    from hystersolve.errors import ConfigError
    cfg = small(quadratic_config()).replace(**{"initial.memory.kind": "from_top"})
    with pytest.raises(ConfigError):
        run_simulation(cfg)
    traj = run_simulation(cfg, force=True)
    assert traj.compat["fail"]
