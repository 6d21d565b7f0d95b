import json

import pytest

from harmonic_phi4.cli import main

SOLVE = """\
[run]
dimension = 1
K = 16
n = 4
dt = 0.01
T = 0.1
seed = 5
"""


@pytest.fixture
def solve_cfg(tmp_path):
    f = tmp_path / "solve.ini"
    f.write_text(SOLVE)
    return f


def test_solve_run_and_verify(tmp_path, solve_cfg, capsys):
    out = tmp_path / "out"
    assert main(["solve", "--config", str(solve_cfg), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["all_passed"] and summary["study"] == "solve"
    assert summary["config"]["values"]["K"] == 16
    assert "solution.csv" in summary["files"]
    capsys.readouterr()
    assert main(["verify", str(out / "summary.json")]) == 0
    assert "PASS reconstruction_residual" in capsys.readouterr().out


def test_verify_tampered_and_missing(tmp_path, solve_cfg, capsys):
    out = tmp_path / "out"
    main(["solve", "--config", str(solve_cfg), "--out", str(out)])
    path = out / "summary.json"
    data = json.loads(path.read_text())
    data["checks"][1]["value"] = 1.0
    path.write_text(json.dumps(data))
    capsys.readouterr()
    assert main(["verify", str(path)]) == 4
    assert "reconstruction_residual" in capsys.readouterr().err
    assert main(["verify", str(tmp_path / "none.json")]) == 5
    (tmp_path / "bad.json").write_text("{")
    assert main(["verify", str(tmp_path / "bad.json")]) == 5


def test_exit_codes(tmp_path, solve_cfg, capsys):
    out = str(tmp_path / "o")
    assert main(["solve", "--config", str(tmp_path / "missing.ini"), "--out", out]) == 5
    bad = tmp_path / "bad.ini"
    bad.write_text(SOLVE.replace("K = 16", "K = x"))
    assert main(["solve", "--config", str(bad), "--out", out]) == 2
    assert "K" in capsys.readouterr().err
    assert main(["solve", "--config", str(solve_cfg), "--set", "K=400", "--out", out]) == 3
    assert main(["solve", "--config", str(solve_cfg), "--set", "residual_max=1e-300", "--out", out]) == 4
    assert "reconstruction_residual" in capsys.readouterr().err


def test_empty_config_names_missing_key(tmp_path, capsys):
    f = tmp_path / "empty.ini"
    f.write_text("")
    assert main(["covariance-check", "--config", str(f), "--out", str(tmp_path / "o")]) == 2
    assert "dimension" in capsys.readouterr().err


def test_renorm_study_without_c2(tmp_path):
    f = tmp_path / "r.ini"
    f.write_text("[run]\ndimension = 1\nn = 4, 5, 6\n[renorm]\nc2 = false\n")
    out = tmp_path / "r"
    code = main(["renorm-study", "--config", str(f), "--out", str(out)])
    header = (out / "renorm.csv").read_text().splitlines()[0]
    assert header.startswith("n,x,c1,c2,combined")
    summary = json.loads((out / "summary.json").read_text())
    assert code == (0 if summary["all_passed"] else 4)


def test_rerun_is_byte_identical(tmp_path, solve_cfg):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["solve", "--config", str(solve_cfg), "--set", "write_paths=true", "--out", str(out)]) == 0
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file() and p.name != "summary.json")
    assert any(str(f).endswith(".bin") for f in files)
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes(), f
