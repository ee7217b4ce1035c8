import numpy as np
import pytest

from gch.initial_data import DataParams, build_bundle
from gch.spectral import Field, Grid

# acceptance criteria append (label, passed, detail); printed in the terminal summary
ACCEPTANCE = []


def record_criterion(label, passed, detail=""):
    ACCEPTANCE.append((label, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}")


def random_trig_field(rng, grid, kmax, amp=1.0):
    """Random real trigonometric polynomial with modes ``|k| <= kmax``."""
    spec = np.zeros(grid.N // 2 + 1, complex)
    spec[:kmax + 1] = rng.normal(size=kmax + 1) + 1j * rng.normal(size=kmax + 1)
    spec[0] = spec[0].real
    spec *= amp * grid.N / np.sqrt(kmax + 1)
    return Field.from_rspectrum(grid, spec)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def torus():
    return Grid(2 * np.pi, 64)


@pytest.fixture(scope="session")
def bundle16():
    return build_bundle(DataParams(n=16, Q=2))


@pytest.fixture(scope="session")
def small_lambda_bundle():
    return build_bundle(DataParams.lambda_family(2 ** 10, 2))
