import numpy as np
import pytest

from lapue import load_config
from lapue.network import Arc, Network, ODPair, Path
from lapue.stochastics import sample_scenarios


@pytest.fixture(scope="session")
def net1_config():
    return load_config("network1")


@pytest.fixture(scope="session")
def nd_config():
    return load_config("nguyen_dupuis")


@pytest.fixture(scope="session")
def net1_scenarios(net1_config):
    pc = net1_config
    return sample_scenarios(pc.capacity_models, pc.samples, pc.seed)


@pytest.fixture(scope="session")
def nd_scenarios(nd_config):
    pc = nd_config
    return sample_scenarios(pc.capacity_models, pc.samples, pc.seed)


def random_feasible(network, inc, rng):
    f = np.zeros(network.n_paths)
    for idx, q in zip(inc.blocks, network.demand):
        f[idx] = rng.dirichlet(np.ones(len(idx))) * q
    return f


def two_route_network(demand=10.0):
    """One OD with two parallel single-arc routes."""
    arcs = (Arc(1, 1, 2, t0=1.0), Arc(2, 1, 2, t0=2.0))
    net = Network((1, 2), arcs, (ODPair(1, 2, demand),))
    return net.with_paths([Path((1,), 0), Path((2,), 0)])


@pytest.fixture
def two_route():
    return two_route_network()


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
