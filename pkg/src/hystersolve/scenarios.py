"""Built-in scenarios used by the sample configs and the tests."""

from __future__ import annotations

import numpy as np

from .config import SimulationConfig


def steady_config(value: float = 0.3) -> SimulationConfig:
    """Constant pressure equal to the boundary pressure: nothing moves."""
    return SimulationConfig().replace(**{
        "initial.u0.value": value,
        "laws.u_star.left0": value,
        "laws.u_star.right0": value,
    })


def ramp_config() -> SimulationConfig:
    """Wetting from the left with a slower rise on the right."""
    return SimulationConfig().replace(**{
        "preisach.offset": 0.2,
        "preisach.density.r_support": 1.0,
        "laws.kappa.kind": "tanh",
        "laws.gamma_left": 10.0,
        "laws.gamma_right": 0.5,
        "laws.u_star_bound": 0.8,
        "laws.u_star.kind": "ramp",
        "laws.u_star.left0": 0.1,
        "laws.u_star.left1": 0.8,
        "laws.u_star.right0": 0.1,
        "laws.u_star.right1": 0.3,
        "initial.u0.value": 0.1,
    })


def cycle_config() -> SimulationConfig:
    """Wetting and drying cycles driven by a sinusoidal boundary pressure."""
    return SimulationConfig().replace(**{
        "preisach.density.kind": "separable",
        "preisach.density.value": 1.5,
        "preisach.density.r_decay": 1.0,
        "preisach.density.v_decay": 0.5,
        "preisach.outer.kind": "sinh",
        "preisach.outer.strength": 0.5,
        "laws.gamma_left": 5.0,
        "laws.gamma_right": 5.0,
        "laws.u_star_bound": 0.6,
        "laws.u_star.kind": "sinusoid",
        "laws.u_star.amplitude": 0.6,
        "laws.u_star.frequency": 2.0,
        "time.steps": 200,
    })


def quadratic_config() -> SimulationConfig:
    """Curved initial pressure in equilibrium with its Robin data at t = 0.

    ``u0 = 0.2 + 0.1 (x - 1/2)^2`` has ``div(grad u0) = 0.2``; the boundary
    pressure ``0.325`` makes the initial flux match ``gamma (u0 - u*)`` and the
    memory descends along ``u0 - r`` far enough for the sign condition.
    """
    return SimulationConfig().replace(**{
        "initial.u0.kind": "quadratic",
        "initial.u0.value": 0.2,
        "initial.u0.curvature": 0.1,
        "initial.memory.kind": "from_bottom",
        "laws.u_star.left0": 0.325,
        "laws.u_star.right0": 0.325,
    })


SCENARIOS = {
    "steady": steady_config,
    "ramp": ramp_config,
    "cycle": cycle_config,
    "quadratic": quadratic_config,
}


def random_config(seed: int) -> SimulationConfig:
    """Randomized scenario that satisfies the standing assumptions and the compatibility checks.

    The initial pressure is constant and equals the boundary pressure at
    ``t = 0``; the memory is one of the monotone-history profiles.
    """
    rng = np.random.default_rng(seed)
    lam = float(rng.uniform(0.6, 1.2))
    u_bound = float(rng.uniform(0.4, 1.0))
    reach = min(lam, u_bound)
    c = float(rng.uniform(-0.5, 0.5) * reach)
    over = {
        "preisach.lambda_max": lam,
        "preisach.offset": float(rng.uniform(0.0, 0.3)),
        "laws.u_star_bound": u_bound,
        "laws.gamma_left": float(rng.uniform(0.5, 10.0)),
        "laws.gamma_right": float(rng.uniform(0.0, 10.0)),
        "initial.u0.value": c,
        "initial.memory.kind": str(rng.choice(["loaded", "from_top", "from_bottom"])),
        "laws.u_star.left0": c,
        "laws.u_star.right0": c,
    }
    if rng.random() < 0.5:
        over.update({"preisach.density.kind": "constant", "preisach.density.value": float(rng.uniform(0.5, 2.0))})
    else:
        over.update({"preisach.density.kind": "separable", "preisach.density.value": float(rng.uniform(0.5, 2.0)),
                     "preisach.density.x_slope": float(rng.uniform(0.0, 0.3)),
                     "preisach.density.r_decay": float(rng.uniform(0.0, 2.0)),
                     "preisach.density.v_decay": float(rng.uniform(0.0, 1.0))})
    if rng.random() < 0.3:
        over.update({"preisach.outer.kind": "sinh", "preisach.outer.strength": float(rng.uniform(0.2, 1.0))})
    if rng.random() < 0.5:
        over.update({"laws.kappa.kind": "tanh", "laws.kappa.k_min": float(rng.uniform(0.2, 1.0)),
                     "laws.kappa.k_max": float(rng.uniform(1.0, 3.0)),
                     "laws.kappa.slope": float(rng.uniform(0.5, 5.0))})
    else:
        over["laws.kappa.value"] = float(rng.uniform(0.2, 3.0))
    if rng.random() < 0.5:
        over.update({"laws.u_star.kind": "ramp",
                     "laws.u_star.left1": float(rng.uniform(-1, 1) * u_bound),
                     "laws.u_star.right1": float(rng.uniform(-1, 1) * u_bound)})
    else:
        over.update({"laws.u_star.kind": "sinusoid",
                     "laws.u_star.amplitude": float(rng.uniform(0.2, 1.0) * (u_bound - abs(c))),
                     "laws.u_star.frequency": float(rng.uniform(0.5, 3.0))})
    return SimulationConfig().replace(**over)
