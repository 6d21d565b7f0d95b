import re

import numpy as np
import pytest

from harmonic_phi4.hermite import build_basis
from harmonic_phi4.paracalc import ProductSpace


@pytest.fixture(scope="session")
def basis1():
    return build_basis(1, 32)


@pytest.fixture(scope="session")
def basis3():
    return build_basis(3, 20)


@pytest.fixture(scope="session")
def space1(basis1):
    return ProductSpace(basis1)


@pytest.fixture(scope="session")
def coll1(basis1):
    return ProductSpace(basis1, "collocation")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_coeffs(rng, basis, decay=1.0):
    """Random coefficients with a mild decay in the eigenvalue, a typical smooth field."""
    return rng.standard_normal(basis.size) * basis.eigenvalues ** (-decay)


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance(request):
    """record(label, passed, detail): one PASS/FAIL line per criterion, echoed in the summary."""
    lines = request.config.stash[_ACCEPTANCE]

    def record(label, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} criterion {label}: {detail}"
        lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: _criterion_key(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


def _criterion_key(label):
    m = re.match(r"\d+", label)
    return int(m.group()) if m else 0, label


def pytest_addoption(parser):
    parser.addoption("--run-long", action="store_true", default=False, help="run the optional d=3 acceptance run")
