from __future__ import annotations

import json
import subprocess
import sys

import pytest

from diffuse_domain.cli import main

SMALL = """\
geometry = "circle"
radius = 1.0
box = [-2.0, 2.0, -2.0, 2.0]
epsilon = [0.4, 0.3, 0.2]
rho = 2
problem = "rdd"
profile = "double-obstacle"
f = { const = 1.0 }
g = { const = 1.0 }
beta = 1.0
"""


@pytest.fixture
def small(tmp_path):
    p = tmp_path / "small.toml"
    p.write_text(SMALL)
    return p


def test_run_writes_report(small, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", str(small), "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert len(rep["rows"]) == 1
    assert rep["rows"][0]["eps"] == 0.4
    assert rep["rows"][0]["norms"]["h1_omega_star_err"] <= 1e-8
    assert (out / "report.csv").exists()


def test_sweep_outputs(small, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["sweep", str(small), "--out", str(out), "--threads", "2"]) == 0
    assert len((out / "report.csv").read_text().splitlines()) == 4
    assert (out / "h1_omega_star_err.dat").exists()
    assert "report.csv" in capsys.readouterr().out


def test_missing_epsilon_exit_code(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text(SMALL.replace("epsilon = [0.4, 0.3, 0.2]\n", ""))
    proc = subprocess.run([sys.executable, "-m", "diffuse_domain.cli", "run", str(p),
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 2
    err = json.loads(proc.stderr)
    assert err["error"] == "config"
    assert err["key"] == "epsilon"


def test_bad_flags(small, tmp_path, capsys):
    assert main(["run", str(small), "--threads", "0"]) == 2
    assert main(["run", str(small), "--seed", str(2 ** 64)]) == 2


def test_verify(small, tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["verify", str(small), "--out", str(out)])
    res = json.loads((out / "lemmas.json").read_text())
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == len(res["properties"])
    assert all(l.split()[0] in ("PASS", "FAIL") for l in lines)
    assert code == (0 if res["passed"] else 1)


def test_oracle(small, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["oracle", str(small), "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary
    assert any(out.iterdir())
