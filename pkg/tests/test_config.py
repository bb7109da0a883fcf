import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hystersolve.config import (SimulationConfig, dumps, flatten, loads, parse_config, validate,
                                write_config)
from hystersolve.errors import ConfigError
from hystersolve.scenarios import SCENARIOS


def test_minimal_config_gets_defaults(tmp_path):
    path = tmp_path / "min.cfg"
    path.write_text("# minimal\nmesh.nodes = 21\n")
    cfg = parse_config(path)
    assert cfg.mesh.nodes == 21
    assert cfg.solver.tol == 1e-10 and cfg.solver.relaxation == 0.8
    assert cfg.solver.max_iter == 200 and cfg.solver.retries == 3


def test_gamma_zero_rejected(tmp_path):
    path = tmp_path / "g.cfg"
    path.write_text("laws.gamma_left = 0.0\nlaws.gamma_right = 0.0\n")
    with pytest.raises(ConfigError) as exc:
        parse_config(path)
    assert any(v.startswith("hy2") and "gamma integral zero" in v for v in exc.value.violations)


def test_u0_above_lambda_rejected(tmp_path):
    path = tmp_path / "u.cfg"
    path.write_text("initial.u0.value = 1.5\npreisach.lambda_max = 1.0\n")
    with pytest.raises(ConfigError) as exc:
        parse_config(path)
    assert any(v.startswith("hy1") for v in exc.value.violations)


def test_boundary_above_ustar_rejected():
    cfg = SimulationConfig().replace(**{"laws.u_star.left0": 2.0})
    assert any(v.startswith("hy2") and "U*" in v for v in validate(cfg))


@pytest.mark.parametrize("text,line", [
    ("mesh.nodes = 11\nmesh.nodes = 12\n", 2),
    ("mesh.nodes = eleven\n", 1),
    ("\n\nnot a pair\n", 3),
    ("mesh.bogus = 1\n", 1),
    ("mesh.nodes = 1.5\n", 1),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ConfigError) as exc:
        loads(text)
    assert exc.value.line == line


def test_null_only_for_optional():
    assert loads("preisach.density.r_support = null\n").preisach.density.r_support is None
    with pytest.raises(ConfigError):
        loads("mesh.length = null\n")


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_scenarios_valid_and_roundtrip(name, tmp_path):
    cfg = SCENARIOS[name]()
    assert validate(cfg) == []
    path = tmp_path / f"{name}.cfg"
    write_config(cfg, path)
    assert parse_config(path) == cfg


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@given(finite, finite, st.integers(2, 500), st.booleans(), st.one_of(st.none(), finite),
       st.text(alphabet="abcdefghij_/.", min_size=1, max_size=12))
def test_roundtrip_is_bit_exact(a, b, n, flag, opt, text):
    cfg = SimulationConfig().replace(**{
        "preisach.offset": a, "laws.u_star.amplitude": b, "mesh.nodes": n,
        "output.figures": flag, "laws.u_star.left1": opt, "output.directory": text,
    })
    again = loads(dumps(cfg))
    assert again == cfg
    for key, val in flatten(cfg).items():
        other = flatten(again)[key]
        if isinstance(val, float):
            assert math.copysign(1, val) == math.copysign(1, other)


def test_replace_unknown_key():
    with pytest.raises(ConfigError):
        SimulationConfig().replace(**{"mesh.size": 3})
