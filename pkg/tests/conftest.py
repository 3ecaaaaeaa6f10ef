import numpy as np
import pytest
from hypothesis import settings

from spin_processor.cluster import SpinCluster

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

TWO_PI = 2 * np.pi

# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def random_cluster(n, seed, d_hz=300.0, spread_hz=1000.0):
    """Generic cluster: random offsets and couplings, no symmetry."""
    rng = np.random.default_rng(seed)
    c = np.triu(rng.uniform(-d_hz, d_hz, (n, n)), 1)
    c = c + c.T
    return SpinCluster(TWO_PI * rng.uniform(-spread_hz, spread_hz, n), TWO_PI * c)


def single(op, site, n):
    """Brute-force single-spin operator embedded by Kronecker products."""
    out = np.eye(1)
    for k in range(n):
        out = np.kron(out, op if k == site else np.eye(2))
    return out


SX = np.array([[0, 0.5], [0.5, 0]], dtype=complex)
SY = np.array([[0, -0.5j], [0.5j, 0]])
SZ = np.array([[0.5, 0], [0, -0.5]], dtype=complex)


def brute_hamiltonian(cluster):
    n = cluster.n_spins
    h = sum(cluster.offsets[i] * single(SZ, i, n) for i in range(n))
    for i in range(n):
        for j in range(i + 1, n):
            d = cluster.couplings[i, j]
            h = h + d * (
                2 * single(SZ, i, n) @ single(SZ, j, n)
                - single(SX, i, n) @ single(SX, j, n)
                - single(SY, i, n) @ single(SY, j, n)
            )
    return h


def brute_sx(n):
    return sum(single(SX, i, n) for i in range(n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def desk():
    from spin_processor.experiments import Experiment, desk_config

    return Experiment(desk_config())


@pytest.fixture(scope="session")
def desk_calibration(desk):
    return desk.calibrate()
