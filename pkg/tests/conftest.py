import numpy as np
import pytest

from qdmro.lindblad import JumpChannel
from qdmro.states import DensityMatrix


def random_state(rng, dim, rank=None):
    rank = rank or dim
    a = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = a @ a.conj().T
    return DensityMatrix(rho / np.trace(rho).real)


def random_hermitian(rng, dim, scale=1.0):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * 0.5 * (a + a.conj().T)


def random_channels(rng, dim, count, max_rate=1.0):
    out = []
    for k in range(count):
        op = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        op /= np.linalg.norm(op)
        out.append(JumpChannel(op, float(rng.uniform(0, max_rate)), collected=bool(k % 2), name=f"c{k}"))
    return out


def two_level_decay(gamma=1.0):
    L = np.array([[0, 1], [0, 0]], dtype=complex)  # |g><e| with g=0, e=1
    return np.zeros((2, 2), dtype=complex), [JumpChannel(L, gamma, collected=True, name="decay")]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_line():
    """Record one summary line per acceptance criterion (printed at the end of the run)."""
    return _ACCEPTANCE_LINES.append


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
