from __future__ import annotations

import json

from lgtlab.cli import main, render_csv
from lgtlab.experiments import Table


def _write(tmp_path, text):
    p = tmp_path / "cfg.ini"
    p.write_text(text)
    return str(p)


def test_empty_experiment_list_writes_manifest_only(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", _write(tmp_path, "[run]\nexperiments = []\n"), "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["manifest.json"]
    man = json.loads((out / "manifest.json").read_text())
    assert man["experiments"] == [] and man["status"] == 0 and man["seed"] == 0
    assert "numpy" in man["versions"]


def test_unknown_experiment_is_invalid(tmp_path, capsys):
    cfg = _write(tmp_path, '[run]\nexperiments = ["warp-drive"]\n')
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "run.experiments[0]" in capsys.readouterr().err


def test_bad_arguments_are_invalid(tmp_path):
    assert main(["frobnicate"]) == 2
    assert main(["dyson", "--seed", "-3", "--out", str(tmp_path)]) == 2
    assert main(["dyson", "--config", str(tmp_path / "missing.ini")]) == 2


def test_lattice_audit(tmp_path):
    out = tmp_path / "o"
    assert main(["lattice-audit", "--out", str(out)]) == 0
    lines = (out / "lattice_audit.csv").read_text().splitlines()
    assert lines[0].startswith("# config_sha256=") and "units:" in lines[0]
    assert lines[1] == "d,n,boundary_links,expected_links,boundary_plaquettes,plaquette_bound,pass"
    assert [row.split(",")[2] for row in lines[2:]] == ["54", "150", "294"]
    assert not [p for p in out.iterdir() if p.name.endswith(".tmp")]


def test_infeasible_refusal_reports_budget(tmp_path, capsys):
    cfg = _write(tmp_path, "[budget]\nsector = 1000\nsparse = 1000\n")
    assert main(["lr-verify", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "3359232" in err and "budget" in err


def test_failed_check_exit_code(tmp_path):
    # a lattice-audit pair with n too small to hold the full boundary fails the closed form
    cfg = _write(tmp_path, "[lattice-audit]\npairs = [(2, 2)]\n")
    assert main(["lattice-audit", "--config", cfg, "--out", str(tmp_path / "o")]) == 1


def test_render_csv_format():
    t = Table(["a", "b"], "none", [[1, 0.1], [2, 1e-20]])
    text = render_csv(t, "abc", 5)
    assert text == "# config_sha256=abc seed=5 units: none\na,b\n1,0.1\n2,1e-20\n"


def test_dyson_and_gauss_deterministic(tmp_path):
    for name in ("dyson", "gauss"):
        a, b = tmp_path / f"{name}1", tmp_path / f"{name}2"
        assert main([name, "--out", str(a), "--seed", "3"]) == 0
        assert main([name, "--out", str(b), "--seed", "3"]) == 0
        for f in a.glob("*.csv"):
            assert f.read_bytes() == (b / f.name).read_bytes()
