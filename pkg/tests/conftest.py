import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from decaylab.spectral import Field, Grid

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def band_limited(grid: Grid, rng: np.random.Generator, kmax: int = 10) -> Field:
    """Random real field with modes |k| <= kmax in every direction."""
    spec = np.zeros(grid.spectral_shape, dtype=complex)
    keep = np.abs(grid.mode_x) <= kmax
    if grid.ndim == 2:
        keep = keep & (grid.mode_y <= kmax)
    keep = np.broadcast_to(keep, grid.spectral_shape)
    spec[keep] = rng.standard_normal(np.count_nonzero(keep)) + 1j * rng.standard_normal(np.count_nonzero(keep))
    return Field.from_spectrum(grid, spec)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid1d():
    return Grid(128, 2 * np.pi)


@pytest.fixture
def grid2d():
    return Grid(64, 2 * np.pi, 32, 2 * np.pi)


ACCEPTANCE_LINES: list[str] = []


def report_criterion(label: str, ok: bool, detail: str) -> None:
    """Record one acceptance line; printed now and again in the terminal summary."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
