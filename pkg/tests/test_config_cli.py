import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from jacobi3.cli import main
from jacobi3.config import DEFAULT_TOLERANCES, config_hash, load_config, parse_config
from jacobi3.errors import ConfigError
from jacobi3.hamflow import abc_field

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def cfg(name):
    return str(CONFIGS / name)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def fields(out):
    """Report lines as a dict; repeated keys (rows) collect into lists."""
    d = {}
    for line in out.splitlines():
        key, _, value = line.partition(": ")
        d.setdefault(key, []).append(value)
    return {k: v if len(v) > 1 or k == "row" else v[0] for k, v in d.items()}


def write(tmp_path, obj, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(p)


POISSON_Z = {"kind": "poisson", "mu": "1", "psi": "z",
             "domain": {"min": [-1, -1, -1], "max": [1, 1, 1]}, "samples": 300, "seed": 9}


# --- config parsing ---------------------------------------------------------


def test_example_configs_parse():
    for path in sorted(CONFIGS.glob("*.json")):
        c = load_config(str(path))
        assert c.kind in ("rank3", "rank2", "poisson", "custom")
        assert len(c.sha256) == 64


def test_defaults_and_overrides():
    c = parse_config(dict(POISSON_Z, tolerances={"residual": 1e-9}))
    assert c.tol("residual") == 1e-9
    assert c.tol("jacobi") == DEFAULT_TOLERANCES["jacobi"]
    c = parse_config({k: v for k, v in POISSON_Z.items() if k not in ("samples", "seed")})
    assert c.samples == 1000 and c.seed == 0
    assert parse_config(dict(POISSON_Z, seed=-1)).seed == 2**64 - 1


def test_hash_ignores_key_order():
    a = dict(POISSON_Z)
    b = dict(reversed(list(POISSON_Z.items())))
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(dict(POISSON_Z, seed=10))


@pytest.mark.parametrize("bad", [
    dict(POISSON_Z, extra=1),
    dict(POISSON_Z, kind="rank4"),
    {k: v for k, v in POISSON_Z.items() if k != "psi"},
    {k: v for k, v in POISSON_Z.items() if k != "domain"},
    dict(POISSON_Z, psi="z +"),
    dict(POISSON_Z, psi="q"),
    dict(POISSON_Z, psi="u"),
    dict(POISSON_Z, psi=True),
    dict(POISSON_Z, domain={"min": [0, 0, 0], "max": [1, 0, 1]}),
    dict(POISSON_Z, domain={"min": [0, 0], "max": [1, 1]}),
    dict(POISSON_Z, domain={"min": [0, 0, 0], "max": [1, 1, 1], "step": 1}),
    dict(POISSON_Z, samples=0),
    dict(POISSON_Z, samples=1.5),
    dict(POISSON_Z, seed=2**64),
    dict(POISSON_Z, seed="1"),
    dict(POISSON_Z, tolerances={"nope": 1}),
    dict(POISSON_Z, tolerances={"residual": -1}),
    {"kind": "rank2", "mu": "1", "xi1": "x", "xi2": "y", "psi_hat": "x^2",
     "domain": {"min": [0, 0, 0], "max": [1, 1, 1]}},
    {"kind": "custom", "A": ["x", "y"], "E": ["0", "0", "0"],
     "domain": {"min": [0, 0, 0], "max": [1, 1, 1]}},
    [1, 2],
])
def test_config_errors(bad):
    with pytest.raises(ConfigError):
        parse_config(bad)


def test_numbers_accepted_as_expressions():
    c = parse_config(dict(POISSON_Z, mu=2))
    assert c.fields["mu"] == "2"


# --- exit codes -------------------------------------------------------------


def test_exit_code_2_on_config_problems(tmp_path, capsys):
    assert run(capsys, "verify", "--config", str(tmp_path / "missing.json"))[0] == 2
    assert run(capsys, "verify", "--config", write(tmp_path, "{not json"))[0] == 2
    code, _, err = run(capsys, "verify", "--config", write(tmp_path, dict(POISSON_Z, colour="red")))
    assert code == 2 and "colour" in err
    code, _, _ = run(capsys, "bracket", "--config", cfg("cylinder_rank2.json"), "--f", "x +", "--g", "z")
    assert code == 2
    code, _, _ = run(capsys, "flow", "--config", cfg("cylinder_rank2.json"), "--x0", "1,0", "--t-end", "1")
    assert code == 2


def test_exit_code_1_on_unusable_structure(tmp_path, capsys):
    bad = {"kind": "rank3", "A": ["2*x", "2*y", "0"], "domain": {"min": [0, 0, 0], "max": [1, 1, 1]}}
    code, out, err = run(capsys, "verify", "--config", write(tmp_path, bad))
    assert code == 1 and out == "" and "DegenerateHelicity" in err


def test_argparse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate", "--config", cfg("abc_rank3.json")])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["verify"])
    assert info.value.code == 2


# --- commands ---------------------------------------------------------------


def test_verify_pass_and_report_shape(capsys):
    code, out, _ = run(capsys, "verify", "--config", cfg("abc_rank3.json"))
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == f"command: jacobi3 verify --config {cfg('abc_rank3.json')}"
    assert lines[1].startswith("config_sha256: ")
    assert lines[-2] == "verdict: PASS" and lines[-1].startswith("wall_time_s: ")
    checks = [l for l in lines if l.startswith("check ")]
    assert len(checks) == 7 and all(l.endswith("PASS") for l in checks)


def test_verify_negative_control(capsys):
    code, out, _ = run(capsys, "verify", "--config", cfg("abc_no_reeb.json"))
    assert code == 1
    f = fields(out)
    c = load_config(cfg("abc_no_reeb.json"))
    pts = c.domain.points()
    mean_sq = np.mean(np.sum(abc_field(1, 1, 1)(pts) ** 2, axis=1))
    assert float(f["r1.mean_abs"]) == pytest.approx(mean_sq, rel=1e-12)
    assert f["verdict"] == "FAIL"


def test_verify_poisson(tmp_path, capsys):
    assert run(capsys, "verify", "--config", write(tmp_path, POISSON_Z))[0] == 0


def test_bracket(tmp_path, capsys):
    code, out, _ = run(capsys, "bracket", "--config", cfg("cylinder_rank2.json"),
                       "--f", "x", "--g", "z", "--point", "1,1,0")
    assert code == 0
    f = fields(out)
    assert f["bracket"] == "-(2*y) - x"
    assert f["row"][0] == "1 1 0 -3"
    code, out, _ = run(capsys, "bracket", "--config", cfg("cylinder_rank2.json"), "--f", "x*z", "--g", "x*z")
    assert all(r.split()[-1] == "0" for r in fields(out)["row"])
    code, out, _ = run(capsys, "bracket", "--config", write(tmp_path, POISSON_Z), "--f", "1", "--g", "x*y+z")
    rows = fields(out)["row"]
    assert len(rows) == 10 and all(r.split()[-1] == "0" for r in rows)


def test_flow_cylinder(tmp_path, capsys):
    out_csv = tmp_path / "traj.csv"
    code, out, _ = run(capsys, "flow", "--config", cfg("cylinder_rank2.json"), "--x0", "1,0,0",
                       "--t-end", "10", "--out", str(out_csv))
    assert code == 0
    rows = list(csv.DictReader(out_csv.open()))
    last = rows[-1]
    assert abs(float(last["x"]) - 1) <= 1e-8 and abs(float(last["y"])) <= 1e-8
    assert abs(float(last["z"]) + 10) <= 1e-8
    psi = np.array([float(r["psi"]) for r in rows])
    assert np.max(np.abs(psi - psi[0])) <= 1e-8
    assert fields(out)["verdict"] == "PASS"


def test_flow_with_casimir(capsys):
    code, out, _ = run(capsys, "flow", "--config", cfg("cylinder_rank2.json"), "--x0", "1,0.2,0",
                       "--t-end", "10", "--n-out", "20", "--transversal", "v", "--side", "u")
    assert code == 0
    assert float(fields(out)["drift.casimir"]) <= 1e-5


def test_flow_abc_divergence_column(tmp_path, capsys):
    out_csv = tmp_path / "abc.csv"
    code, out, _ = run(capsys, "flow", "--config", cfg("abc_rank3.json"), "--x0", "0.7,0.7,0.7",
                       "--t-end", "5", "--out", str(out_csv))
    assert code == 0
    assert "check div_vH_formula" in out
    rows = list(csv.DictReader(out_csv.open()))
    assert rows[0]["psi"] == "" and rows[0]["div_vH"] != ""
    assert {r["H"] for r in rows} == {"1"}


def test_casimir_command(capsys):
    code, out, _ = run(capsys, "casimir", "--config", cfg("cylinder_rank2.json"), "--transversal", "v",
                       "--side", "u", "--point", "0,1,0", "--point", "1,0,0")
    assert code == 0
    rows = fields(out)["row"]
    assert abs(float(rows[0].split()[-1]) - 2.19328) <= 1e-5
    assert float(rows[1].split()[-1]) == 1.0
    code, out, err = run(capsys, "casimir", "--config", cfg("abc_rank3.json"), "--transversal", "v")
    assert code == 1 and "no nontrivial Casimirs" in err


def test_contact_classify(capsys):
    code, out, _ = run(capsys, "contact", "--config", cfg("abc_rank3.json"))
    assert code == 0 and out.count("PASS") == 5
    code, out, _ = run(capsys, "classify", "--config", cfg("abc_rank3.json"), "--expect", "rank3")
    assert code == 0 and fields(out)["rank"] == "rank3"
    code, out, _ = run(capsys, "classify", "--config", cfg("cylinder_rank2.json"))
    assert fields(out)["rank"] == "rank2"
    code, out, _ = run(capsys, "classify", "--config", cfg("axis_degenerate.json"), "--expect", "rank2")
    assert code == 1 and fields(out)["rank"] == "degenerate"
    code, out, _ = run(capsys, "contact", "--config", cfg("cylinder_rank2.json"))
    assert code == 1


def test_poissonize(capsys):
    assert run(capsys, "poissonize", "--config", cfg("cylinder_rank2.json"))[0] == 0
    code, out, _ = run(capsys, "poissonize", "--config", cfg("abc_no_reeb.json"))
    assert code == 1 and "FAIL" in out


def test_conformal(capsys):
    code, out, _ = run(capsys, "conformal", "--config", cfg("cylinder_rank2.json"), "--lambda", "1/mu")
    assert code == 0
    assert fields(out)["E_tilde"] == "(0, 0, -1)"
    code, _, _ = run(capsys, "conformal", "--config", cfg("abc_rank3.json"), "--lambda", "2")
    assert code == 0
    code, _, err = run(capsys, "conformal", "--config", cfg("abc_rank3.json"), "--lambda", "1/mu")
    assert code == 2 and "mu" in err


@pytest.mark.parametrize("argv", [
    ["verify", "--config", cfg("cylinder_rank2.json")],
    ["poissonize", "--config", cfg("poisson.json")],
    ["bracket", "--config", cfg("abc_rank3.json"), "--f", "x*y", "--g", "sin(z)"],
])
def test_reports_are_deterministic(capsys, argv):
    a = run(capsys, *argv)[1].splitlines()[:-1]
    b = run(capsys, *argv)[1].splitlines()[:-1]
    assert a == b


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "jacobi3", "classify", "--config", cfg("abc_rank3.json")],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert "rank: rank3" in proc.stdout
