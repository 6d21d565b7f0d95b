"""Persistence: binary mode-path files, driver manifests, CSV tables and JSON summaries.

A path file is one line of JSON (the header) followed by the coefficient rows as
row-major little-endian float64, one row per recorded time step.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import HarmonicPhi4Error
from .fields import FieldPath
from .hermite import build_basis
from .rng import GENERATOR_ID

FORMAT = "hphi4-path/1"
_REQUIRED = ("dimension", "K", "n", "dt", "T", "seed", "generator", "rows", "cols")


class FormatError(HarmonicPhi4Error):
    """A persisted file does not follow the expected layout."""


def write_path(file, path, seed=None, extra=None):
    """Write a FieldPath as JSON header line + little-endian float64 rows."""
    coeffs = np.ascontiguousarray(path.coeffs, dtype="<f8")
    meta = dict(path.meta)
    header = {
        "format": FORMAT,
        "dimension": path.basis.dimension,
        "K": path.basis.size,
        "n": meta.get("n"),
        "dt": float(path.dt) if len(path) > 1 else None,
        "T": float(path.times[-1]),
        "t0": float(path.times[0]),
        "seed": meta.get("seed", seed),
        "generator": meta.get("generator", GENERATOR_ID),
        "rows": int(coeffs.shape[0]),
        "cols": int(coeffs.shape[1]),
    }
    if extra:
        header.update(extra)
    file = Path(file)
    with open(file, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(coeffs.tobytes())
    return file


def _parse_header(file, line):
    try:
        header = json.loads(line)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"{file}: header is not JSON") from exc
    missing = [k for k in _REQUIRED if k not in header]
    if missing:
        raise FormatError(f"{file}: header lacks {missing}")
    return header


def read_header(file):
    with open(file, "rb") as fh:
        return _parse_header(file, fh.readline())


def read_path(file, basis=None):
    """Read a path file back into a FieldPath (the basis is rebuilt from the header)."""
    with open(file, "rb") as fh:
        line = fh.readline()
        payload = fh.read()
    header = _parse_header(file, line)
    rows, cols = header["rows"], header["cols"]
    if len(payload) != 8 * rows * cols:
        raise FormatError(f"{file}: expected {rows}x{cols} float64 values, got {len(payload)} bytes")
    coeffs = np.frombuffer(payload, dtype="<f8").reshape(rows, cols).astype(float)
    if basis is None:
        basis = build_basis(header["dimension"], header["K"])
    elif basis.size != cols or basis.dimension != header["dimension"]:
        raise FormatError(f"{file}: basis does not match the header")
    t0 = header.get("t0", 0.0)
    dt = header["dt"] or 0.0
    times = t0 + dt * np.arange(rows)
    meta = {k: header[k] for k in ("n", "seed", "generator") if header.get(k) is not None}
    return FieldPath(basis, times, coeffs, meta), header


def write_driver_set(directory, Z, params):
    """One path file per diagram plus manifest.json naming them."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = list(Z.PATHS) + ["anti_psi_ipsi3", "anti_psi2_ipsi2", "anti_psi2_ipsi3"]
    seed = Z.psi.meta.get("seed")
    entries = {}
    for name in names:
        fname = f"{name}.bin"
        write_path(directory / fname, getattr(Z, name), seed=seed, extra={"diagram": name, "n": Z.n})
        entries[name] = fname
    manifest = {"n": Z.n, "diagrams": entries, "construction": dict(Z.meta), "params": params}
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable))
    return directory / "manifest.json"


def read_driver_manifest(file):
    file = Path(file)
    manifest = json.loads(file.read_text())
    paths = {name: read_path(file.parent / fname)[0] for name, fname in manifest["diagrams"].items()}
    return manifest, paths


def format_number(x):
    """Scientific notation with 15 significant digits; integers stay integers."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.14e}"


def write_csv(file, header, rows):
    with open(file, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(v) for v in row])
    return Path(file)


def read_csv(file):
    with open(file, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def _jsonable(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, Path):
        return str(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def write_json(file, obj):
    Path(file).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return Path(file)


def read_json(file):
    return json.loads(Path(file).read_text())
