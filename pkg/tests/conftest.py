import numpy as np
import pytest

from qpst.topology import NetworkTopology


def random_topology(rng, n=None, damped=True, full_gamma=False):
    """Random small network: symmetric couplings, PSD damping."""
    if n is None:
        n = int(rng.integers(2, 7))
    omega = rng.uniform(-2.0, 2.0, n)
    coupling = rng.uniform(-1.0, 1.0, (n, n))
    coupling = 0.5 * (coupling + coupling.T)
    np.fill_diagonal(coupling, 0.0)
    if not damped:
        gamma = np.zeros((n, n))
    elif full_gamma:
        a = rng.uniform(-0.3, 0.3, (n, n))
        gamma = a @ a.T
    else:
        gamma = np.diag(rng.uniform(0.0, 0.2, n))
    return NetworkTopology(n, omega, coupling, gamma)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
