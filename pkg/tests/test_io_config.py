import json
import math

import numpy as np
import pytest

from harmonic_phi4 import ConfigError
from harmonic_phi4.config import load_config, load_schema, make_config, parse_config
from harmonic_phi4.diagrams import build_driver_set, table_for_space
from harmonic_phi4.hermite import build_basis
from harmonic_phi4.io import (
    FormatError, format_number, read_csv, read_driver_manifest, read_header, read_path, write_csv,
    write_driver_set, write_path,
)
from harmonic_phi4.noise import NoiseConfig, sample_stoch_conv
from harmonic_phi4.paracalc import ProductSpace

GOOD = """\
[run]
study = solve
dimension = 1
K = 16
n = 4
dt = 0.01
T = 0.1
seed = 5

[solve]
x0 = 0.25   # inline comment
"""


def test_path_round_trip(tmp_path):
    b = build_basis(2, 10)
    p = sample_stoch_conv(NoiseConfig(b, 3, 9, 0.05, 0.5), replica=1)
    f = write_path(tmp_path / "psi.bin", p)
    q, header = read_path(f)
    assert np.array_equal(p.coeffs, q.coeffs) and np.allclose(p.times, q.times)
    assert header["dimension"] == 2 and header["K"] == 10 and header["seed"] == 9
    assert read_header(f)["rows"] == 11
    with pytest.raises(FormatError):
        read_path(f, basis=build_basis(2, 6))


def test_path_corruption(tmp_path):
    b = build_basis(1, 4)
    f = write_path(tmp_path / "p.bin", sample_stoch_conv(NoiseConfig(b, 3, 9, 0.1, 0.3)))
    data = f.read_bytes()
    (tmp_path / "short.bin").write_bytes(data[:-8])
    with pytest.raises(FormatError):
        read_path(tmp_path / "short.bin")
    (tmp_path / "junk.bin").write_bytes(b"not json\n")
    with pytest.raises(FormatError):
        read_path(tmp_path / "junk.bin")
    (tmp_path / "partial.bin").write_bytes(b'{"K": 4}\n')
    with pytest.raises(FormatError):
        read_header(tmp_path / "partial.bin")


def test_driver_manifest(tmp_path):
    b = build_basis(1, 8)
    space = ProductSpace(b)
    cfg = NoiseConfig(b, 4, 1, 0.05, 0.2)
    table = table_for_space(space, 4, np.arange(cfg.steps + 1) * cfg.dt)
    Z = build_driver_set(sample_stoch_conv(cfg), table, space)
    manifest_file = write_driver_set(tmp_path / "Z", Z, {"seed": 1})
    manifest, paths = read_driver_manifest(manifest_file)
    assert manifest["n"] == 4 and len(paths) == 10
    for name, path in paths.items():
        assert np.array_equal(path.coeffs, getattr(Z, name).coeffs)


def test_csv_format(tmp_path):
    assert format_number(3) == "3"
    assert format_number(np.int64(-2)) == "-2"
    assert format_number(True) == "1"
    x = 0.1234567890123456789
    s = format_number(x)
    assert len(s.split("e")[0].replace(".", "").lstrip("-")) == 15
    assert float(s) == pytest.approx(x, rel=1e-14)
    f = write_csv(tmp_path / "t.csv", ["a", "b"], [[1, 2.5], [3, -1e-20]])
    header, rows = read_csv(f)
    assert header == ["a", "b"] and rows[1] == ["3", "-1.00000000000000e-20"]
    assert f.read_bytes().count(b"\r") == 0


def test_parse_good_config():
    cfg = parse_config(GOOD)
    assert cfg.study == "solve"
    assert cfg["x0"] == 0.25 and cfg["n"] == [4] and cfg["product_rule"] == "auto"
    assert cfg["blowup_threshold"] == math.inf
    assert cfg.echo()["values"]["blowup_threshold"] == "inf"
    json.dumps(cfg.echo())


def test_overrides():
    cfg = parse_config(GOOD, overrides=["solve.x0=1.5", "K = 20"])
    assert cfg["x0"] == 1.5 and cfg["K"] == 20
    with pytest.raises(ConfigError):
        parse_config(GOOD, overrides=["nonsense=1"])
    with pytest.raises(ConfigError):
        parse_config(GOOD, overrides=["K"])


@pytest.mark.parametrize("text, key, line", [
    (GOOD.replace("K = 16", "K = sixteen"), "K", 4),
    (GOOD.replace("dt = 0.01", "dt = -1"), "dt", 6),
    (GOOD.replace("seed = 5", "seeds = 5"), "seeds", 8),
    (GOOD.replace("x0 = 0.25", "K2 = 1"), "K2", 11),
    (GOOD.replace("dimension = 1", "dimension = 4"), "dimension", 3),
    (GOOD + "replica = -1\n", "replica", 12),
    (GOOD.replace("[solve]\nx0 = 0.25   # inline comment", "[solve]\nK = 3"), "K", 11),
])
def test_config_errors_name_line_and_key(text, key, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == key and info.value.line == line
    assert key in str(info.value) and str(line) in str(info.value)


def test_empty_config_names_first_missing_key():
    with pytest.raises(ConfigError) as info:
        parse_config("", study="covariance-check")
    assert info.value.key == "dimension"
    with pytest.raises(ConfigError) as info:
        parse_config("")
    assert info.value.key == "study"


def test_structural_errors():
    with pytest.raises(ConfigError) as info:
        parse_config("K = 1\n")
    assert info.value.line == 1
    with pytest.raises(ConfigError):
        parse_config("[run]\nK = 1\nK = 2\n")
    with pytest.raises(ConfigError):
        parse_config("[nowhere]\nK = 1\n")
    with pytest.raises(ConfigError):
        parse_config(GOOD, study="reconcile")
    with pytest.raises(ConfigError):
        parse_config(GOOD.replace("T = 0.1", "T = 0.001"))
    with pytest.raises(ConfigError) as info:
        make_config("converge", dimension=1, K=4, n=[4], dt=0.1, T=1.0, seed=1, replicas=2)
    assert info.value.key == "n"


def test_schema_documents_every_key():
    schema = load_schema()
    for section in schema["sections"].values():
        for key, spec in section.items():
            assert spec.get("doc"), key
    for study, keys in schema["studies"].items():
        assert all(any(k in s for s in schema["sections"].values()) for k in keys), study


def test_load_config(tmp_path):
    f = tmp_path / "c.ini"
    f.write_text(GOOD)
    assert load_config(f).source == str(f)
    with pytest.raises(OSError):
        load_config(tmp_path / "missing.ini")


def test_make_config():
    cfg = make_config("renorm-study", dimension=3, n=[4, 5], x=[0.0, 1.5])
    assert cfg["x"] == [0.0, 1.5] and cfg["c2"] is True
