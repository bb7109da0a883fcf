import csv
import json
import math

import numpy as np
import pytest

from hystersolve.cli import main
from hystersolve.config import write_config
from hystersolve.scenarios import quadratic_config, ramp_config, steady_config


def small(cfg, **kw):
    base = {"mesh.nodes": 21, "time.steps": 23, "preisach.thresholds": 64, "output.stride": 5}
    base.update(kw)
    return cfg.replace(**base)


def cfg_file(tmp_path, cfg, name="case.cfg"):
    path = tmp_path / name
    write_config(cfg, path)
    return str(path)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_writes_outputs(tmp_path, capsys):
    cfg = small(ramp_config(), **{"output.memory_snapshots": True})
    out = tmp_path / "out"
    code = main(["--out-dir", str(out), "run", cfg_file(tmp_path, cfg)])
    assert code == 0
    rows = read_rows(out / "diagnostics.csv")
    assert len(rows) == cfg.time.steps
    assert list(rows[0]) == ["step", "time", "max_abs_u", "mass_residual", "energy_grad",
                             "energy_boundary", "psi_total", "philog_increment", "solver_iters",
                             "solver_residual"]
    snaps = {r["step"] for r in read_rows(out / "fields.csv")}
    assert len(snaps) == math.ceil(cfg.time.steps / cfg.output.stride) + 1
    mem = read_rows(out / "memory.csv")
    assert len(mem) == len(snaps) * cfg.mesh.nodes * cfg.preisach.thresholds
    summary = json.loads((out / "summary.json").read_text())
    assert summary["schema_version"] == 1 and summary["exit_code"] == 0
    assert summary["config"]["mesh.nodes"] == 21
    assert all(e["status"] == "pass" for e in summary["estimates"] if e["hard"])
    for fig in ("fields.png", "diagnostics.png", "loops.png"):
        assert (out / fig).stat().st_size > 0
    assert b"\r\n" not in (out / "diagnostics.csv").read_bytes()


def test_options_after_subcommand(tmp_path):
    cfg = small(steady_config(), **{"output.figures": False})
    out = tmp_path / "o2"
    assert main(["run", cfg_file(tmp_path, cfg), "--out-dir", str(out)]) == 0
    rows = read_rows(out / "diagnostics.csv")
    assert all(float(r["mass_residual"]) == 0.0 for r in rows)
    assert not (out / "fields.png").exists()


def test_bad_config_exits_3(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("laws.gamma_left = 0.0\nlaws.gamma_right = 0.0\n")
    assert main(["run", str(path)]) == 3
    assert "hy2" in capsys.readouterr().err
    path.write_text("mesh.nodes = [\n")
    assert main(["check-compat", str(path)]) == 3
    assert "line 1" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.cfg")]) == 3


def test_check_compat_codes(tmp_path, capsys):
    assert main(["check-compat", cfg_file(tmp_path, small(steady_config()))]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["pass"]

    mem = tmp_path / "mem.csv"
    lines = ["x,r,lambda"] + [f"{x},{r},{0.3 + (0.1 if r == 0 else 0.0)}"
                              for x in (0.0, 1.0) for r in (0.0, 1.0)]
    mem.write_text("\n".join(lines) + "\n")
    bad = small(steady_config()).replace(**{"initial.memory.kind": "csv", "initial.memory.file": str(mem)})
    assert main(["check-compat", cfg_file(tmp_path, bad, "bad.cfg")]) == 2
    rep = json.loads(capsys.readouterr().out)
    assert next(it for it in rep["items"] if it["name"] == "c0")["status"] == "fail"

    assert main(["check-compat", cfg_file(tmp_path, small(quadratic_config()), "q.cfg")]) == 0
    rep = json.loads(capsys.readouterr().out)
    c1 = next(it for it in rep["items"] if it["name"] == "c1")
    assert len(c1["div"]) == 21 and len(c1["r0"]) == 21


def test_incompatible_run_needs_force(tmp_path):
    cfg = small(quadratic_config(), **{"initial.memory.kind": "from_top", "output.figures": False})
    path = cfg_file(tmp_path, cfg)
    assert main(["--out-dir", str(tmp_path / "a"), "run", path]) == 2
    assert main(["--force", "--out-dir", str(tmp_path / "b"), "run", path]) == 0


def test_refine_steady(tmp_path, capsys):
    cfg = small(steady_config(), **{"time.steps": 8, "output.figures": False})
    out = tmp_path / "r"
    assert main(["--out-dir", str(out), "refine", cfg_file(tmp_path, cfg), "--levels", "3"]) == 0
    study = json.loads((out / "refine.json").read_text())
    assert [lv["n"] for lv in study["levels"]] == [8, 16, 32]
    assert all(d["final_sup"] == 0.0 and d["y_norm"] == 0.0 for d in study["differences"])
    assert len(read_rows(out / "refine.csv")) == 3
    assert main(["refine", cfg_file(tmp_path, cfg), "--levels", "1"]) == 3


def write_samples(path, header, cols):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(zip(*cols))


def test_norms(tmp_path, capsys):
    p = tmp_path / "one.csv"
    x = np.linspace(0, 1, 11)
    write_samples(p, ["x", "v"], [x, np.ones_like(x)])
    assert main(["norms", str(p), "--norm", "luxemburg:power:2"]) == 0
    assert json.loads(capsys.readouterr().out)["luxemburg:power:2"] == pytest.approx(1.0, rel=1e-12)

    T = 2.0
    t = np.linspace(0, T, 1001)
    write_samples(p, ["t", "v"], [t, math.sqrt(2 / T) * np.sin(np.pi * t / T)])
    assert main(["norms", str(p), "--norm", "Vstar,H"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["Vstar"] == pytest.approx(T / math.pi, rel=1e-10)

    grid = [(ti, xi, 0.0) for ti in (0.0, 0.5, 1.0) for xi in (0.0, 0.5, 1.0)]
    write_samples(p, ["t", "x", "u"], list(zip(*grid)))
    assert main(["norms", str(p), "--norm", "X", "--norm", "Y"]) == 0
    assert json.loads(capsys.readouterr().out) == {"X": 0.0, "Y": 0.0}

    empty = tmp_path / "empty.csv"
    empty.write_text("x,v\n")
    assert main(["norms", str(empty), "--norm", "H"]) == 3
    assert main(["norms", str(p), "--norm", "bogus"]) == 3
