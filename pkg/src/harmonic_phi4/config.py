"""Run configuration: INI-style key = value text validated against ``config_schema.json``."""
from __future__ import annotations

import configparser
import json
import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .errors import ConfigError

STUDIES = (
    "renorm-study", "covariance-check", "wick-moments", "driver-study", "solve", "reconcile", "converge",
)


@lru_cache(maxsize=1)
def load_schema():
    text = resources.files("harmonic_phi4").joinpath("config_schema.json").read_text()
    return json.loads(text)


def _key_index(schema):
    """key -> (section, spec); keys are unique across sections."""
    return {key: (sec, spec) for sec, keys in schema["sections"].items() for key, spec in keys.items()}


def _convert(raw, spec, key, line):
    kind = spec["type"]
    raw = raw.strip()
    try:
        if kind == "int":
            value = int(raw, 0)
        elif kind == "float":
            value = float(raw)
            if math.isnan(value):
                raise ValueError
        elif kind == "bool":
            low = raw.lower()
            if low not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
                raise ValueError
            value = low in ("true", "yes", "1", "on")
        elif kind == "str":
            value = raw
        elif kind == "int_list":
            value = [int(p, 0) for p in re.split(r"[,\s]+", raw) if p]
            if not value:
                raise ValueError
        elif kind == "float_list":
            value = [float(p) for p in re.split(r"[,\s]+", raw) if p]
            if not value:
                raise ValueError
        else:  # pragma: no cover - schema bug
            raise ConfigError(f"schema type {kind!r} unknown", key=key)
    except ValueError:
        raise ConfigError(f"cannot read {raw!r} as {kind}", line=line, key=key) from None
    items = value if isinstance(value, list) else [value]
    for v in items:
        if "choices" in spec and v not in spec["choices"]:
            raise ConfigError(f"{v!r} is not one of {spec['choices']}", line=line, key=key)
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            if "min" in spec and v < spec["min"]:
                raise ConfigError(f"{v} is below the minimum {spec['min']}", line=line, key=key)
            if "min_exclusive" in spec and not v > spec["min_exclusive"]:
                raise ConfigError(f"{v} must exceed {spec['min_exclusive']}", line=line, key=key)
            if "max" in spec and v > spec["max"]:
                raise ConfigError(f"{v} is above the maximum {spec['max']}", line=line, key=key)
    return value


def _default(spec):
    value = spec.get("default")
    if value == "inf":
        return math.inf
    return list(value) if isinstance(value, list) else value


def _line_numbers(text):
    """(section, key) -> 1-based line number of its assignment."""
    out = {}
    section = None
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"^\[([^\]]+)\]$", s)
        if m:
            section = m.group(1).strip()
            continue
        m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", s)
        if m and section is not None:
            out.setdefault((section, m.group(1).strip()), i)
    return out


@dataclass
class RunConfig:
    """Validated configuration: a flat key -> value mapping plus the study name."""

    study: str
    values: dict
    source: str = None
    overrides: list = field(default_factory=list)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    @property
    def levels(self):
        return list(self.values["n"])

    def echo(self):
        """JSON-ready echo of every value (including defaults) for run summaries."""
        vals = {k: (("inf" if v == math.inf else v) if isinstance(v, float) else v) for k, v in self.values.items()}
        return {"study": self.study, "values": vals, "source": self.source, "overrides": list(self.overrides)}


def _build(study, raw, lines, overrides=(), source=None):
    schema = load_schema()
    index = _key_index(schema)
    values = {}
    for (section, key), (raw_value, line) in raw.items():
        if key not in index:
            raise ConfigError("unknown key", line=line, key=key)
        if index[key][0] != section:
            raise ConfigError(f"key belongs in section [{index[key][0]}]", line=line, key=key)
        values[key] = _convert(raw_value, index[key][1], key, line)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw_value = item.split("=", 1)
        key = key.strip()
        if "." in key:
            key = key.split(".", 1)[1]
        if key not in index:
            raise ConfigError("unknown key in override", key=key)
        values[key] = _convert(raw_value, index[key][1], key, None)
    named = values.pop("study", None)
    if study is None:
        study = named
    if study is None:
        raise ConfigError("missing required key", key="study")
    if study not in STUDIES:
        raise ConfigError(f"unknown study {study!r}", key="study")
    if named is not None and named != study:
        raise ConfigError(f"config names study {named!r} but {study!r} was requested", key="study")
    for key in schema["studies"][study]:
        if key not in values:
            raise ConfigError("missing required key", line=None, key=key)
    for key, (_, spec) in index.items():
        if key != "study" and key not in values and "default" in spec:
            values[key] = _default(spec)
    if values.get("T") is not None and values.get("dt") is not None and values["T"] < values["dt"]:
        raise ConfigError("T must be at least dt", line=lines.get("T"), key="T")
    if study in ("driver-study", "converge") and len(values["n"]) < 2:
        raise ConfigError("this study needs at least two levels", line=lines.get("n"), key="n")
    return RunConfig(study, values, source, list(overrides))


def parse_config(text, study=None, overrides=(), source=None):
    """Parse configuration text; raises ConfigError naming the line and key at fault."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source or "<config>")
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside any [section]", line=exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError("duplicate key", line=exc.lineno, key=exc.option) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", line=exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno, _ = exc.errors[0]
        raise ConfigError("line is neither a [section] nor key = value", line=lineno) from None
    schema = load_schema()
    lines = _line_numbers(text)
    raw = {}
    for section in parser.sections():
        if section not in schema["sections"]:
            raise ConfigError(f"unknown section [{section}]", line=_section_line(text, section))
        for key, value in parser.items(section):
            raw[(section, key)] = (value, lines.get((section, key)))
    flat_lines = {k: v for (_, k), v in lines.items()}
    return _build(study, raw, flat_lines, overrides, source)


def _section_line(text, section):
    for i, line in enumerate(text.splitlines(), start=1):
        if line.strip() == f"[{section}]":
            return i
    return None


def load_config(path, study=None, overrides=()):
    """Read and validate a configuration file (OSError propagates for unreadable files)."""
    text = Path(path).read_text()
    return parse_config(text, study, overrides, source=str(path))


def make_config(study, **values):
    """Programmatic RunConfig with the same validation and defaults as files."""
    schema = load_schema()
    index = _key_index(schema)
    lines = []
    by_section = {}
    for key, value in values.items():
        if key not in index:
            raise ConfigError("unknown key", key=key)
        if isinstance(value, (list, tuple)):
            value = ", ".join(repr(v) if isinstance(v, float) else str(v) for v in value)
        elif isinstance(value, float):
            value = repr(value)
        by_section.setdefault(index[key][0], []).append(f"{key} = {value}")
    for section, items in by_section.items():
        lines.append(f"[{section}]")
        lines.extend(items)
    return parse_config("\n".join(lines) + "\n", study)
