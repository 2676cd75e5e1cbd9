import numpy as np
import pytest

from fwsolitary.spectral_core import make_grid


@pytest.fixture(scope="session")
def grid512():
    return make_grid(40.0, 512)


@pytest.fixture(scope="session")
def wave12(grid512):
    from fwsolitary.traveling_wave import petviashvili_solve
    return petviashvili_solve(1.2, grid512)


def random_smooth(grid, rng, kmax=None):
    """Random real field with a decaying spectrum."""
    n = grid.N // 2 + 1
    kmax = kmax or grid.N // 4
    coef = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    coef *= np.exp(-np.arange(n) / (0.25 * kmax))
    coef[kmax:] = 0.0
    coef[0] = coef[0].real
    coef[-1] = 0.0
    return np.fft.irfft(coef, grid.N) * grid.N ** 0.5


_ACCEPTANCE = []


def record_acceptance(line: str):
    _ACCEPTANCE.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
