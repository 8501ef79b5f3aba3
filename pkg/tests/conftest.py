import numpy as np
import pytest

from qcompa.network import ChannelRealization


def random_channels(rng, n_cells, n_users, n_ant, n_sub, scale=1.0):
    """Unit-variance Rayleigh frequency responses shaped for ``from_freq``."""
    shape = (n_cells, n_cells, n_sub, n_ant, n_users)
    freq = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    return ChannelRealization.from_freq(scale * freq)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
