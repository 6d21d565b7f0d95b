"""Command line: ``hphi4 <study> --config <path> [--set key=value ...] [--out <dir>]`` and ``hphi4 verify <summary>``.

Exit codes: 0 ok, 2 configuration error, 3 capacity error, 4 failed check, 5 I/O error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import STUDIES, load_config
from .errors import CapacityError, ConfigError, ConvergenceError, HarmonicPhi4Error
from .io import FormatError

EXIT_OK, EXIT_CONFIG, EXIT_CAPACITY, EXIT_ASSERT, EXIT_IO = 0, 2, 3, 4, 5


def _parser():
    p = argparse.ArgumentParser(prog="hphi4", description="Harmonic Phi^4 spectral studies")
    sub = p.add_subparsers(dest="command", required=True)
    for study in STUDIES:
        s = sub.add_parser(study, help=f"run the {study} study")
        s.add_argument("--config", required=True, help="configuration file")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a key")
        s.add_argument("--out", default=None, help="output directory (default out/<study>)")
    v = sub.add_parser("verify", help="re-check the assertions recorded in a summary file")
    v.add_argument("summary")
    return p


def _err(msg):
    print(f"hphi4: {msg}", file=sys.stderr)


def verify(summary_path):
    """Recompute every recorded check from its value and bound; returns an exit code."""
    from .studies import evaluate

    try:
        data = json.loads(Path(summary_path).read_text())
    except OSError as exc:
        _err(f"cannot read {summary_path}: {exc.strerror or exc}")
        return EXIT_IO
    except json.JSONDecodeError as exc:
        _err(f"{summary_path} is not valid JSON: {exc}")
        return EXIT_IO
    checks = data.get("checks")
    if not isinstance(checks, list):
        _err(f"{summary_path} has no check list")
        return EXIT_IO
    failed = []
    for c in checks:
        name = c.get("name", "?")
        try:
            ok = evaluate(c["value"], c["op"], c["bound"])
        except (KeyError, TypeError, HarmonicPhi4Error):
            ok = False
        if not ok or c.get("passed") is not True:
            failed.append(name)
        print(f"{'PASS' if ok and c.get('passed') is True else 'FAIL'} {name}")
    if data.get("all_passed") is not (not failed):
        failed.append("all_passed")
    if failed:
        _err("failed checks: " + ", ".join(failed))
        return EXIT_ASSERT
    return EXIT_OK


def run(study, config_path, overrides=(), out=None):
    """Run one study and write its outputs; returns an exit code."""
    from .rng import configure_threads
    from .studies import run_study, write_outputs

    try:
        cfg = load_config(config_path, study, overrides)
    except OSError as exc:
        _err(f"cannot read {config_path}: {exc.strerror or exc}")
        return EXIT_IO
    except ConfigError as exc:
        _err(f"config error: {exc}")
        return EXIT_CONFIG
    configure_threads()
    out_dir = Path(out) if out else Path("out") / study
    try:
        result = run_study(cfg)
        summary = write_outputs(result, cfg, out_dir)
    except CapacityError as exc:
        _err(f"capacity error: {exc}")
        return EXIT_CAPACITY
    except ConvergenceError as exc:
        _err(f"check 'convergence' failed: {exc}")
        return EXIT_ASSERT
    except (OSError, FormatError) as exc:
        _err(f"I/O error: {exc}")
        return EXIT_IO
    except HarmonicPhi4Error as exc:
        _err(f"config error: {exc}")
        return EXIT_CONFIG
    for c in result.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value!r} {c.op} {c.bound!r}")
    print(f"summary: {summary}")
    if not result.passed:
        _err("failed checks: " + ", ".join(result.failed()))
        return EXIT_ASSERT
    return EXIT_OK


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.command == "verify":
        return verify(args.summary)
    return run(args.command, args.config, args.set, args.out)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
