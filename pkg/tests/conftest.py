import numpy as np
import pytest

from strichartz_lab.spectral import Field, Grid


def gaussian(grid, width=1.0):
    """``exp(-|x|^2 / width^2)`` sampled on ``grid``."""
    return Field(grid, np.exp(-grid.r_sq / width**2))


def random_field(grid, rng, band=None):
    """Random smooth field: complex noise filtered to a Gaussian band."""
    noise = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    band = grid.nyquist / 4 if band is None else band
    spec = np.fft.fftn(noise) * np.exp(-grid.xi_sq / band**2)
    window = np.exp(-grid.r_sq / (0.1 * grid.extent) ** 2)
    return Field(grid, np.fft.ifftn(spec) * window)


def plane_wave(grid, modes):
    xi = [m * grid.dxi for m in modes]
    return Field(grid, np.exp(1j * sum(c * k for c, k in zip(grid.coords(), xi)))), xi


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def small_grid():
    return Grid(1, 256, 20.0)


# one line per acceptance criterion, filled by test_acceptance
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
