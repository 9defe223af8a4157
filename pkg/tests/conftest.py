import numpy as np
import pytest

from jointising.core import BinaryDataset, CategoryCollection


def random_theta(rng, p, scale=0.5):
    a = rng.normal(0.0, scale, (p, p))
    return np.triu(a) + np.triu(a, 1).T


def random_data(rng, n, p, prob=0.5):
    return BinaryDataset((rng.random((n, p)) < prob).astype(float))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_collection():
    from jointising.synthetic import make_design, simulate

    design = make_design("chain", 6, 2, 0.0, 120, seed=4)
    return design, simulate(design, burnin=2000, thin=5)


def collection_of(*arrays):
    return CategoryCollection(tuple(BinaryDataset(np.asarray(a, float)) for a in arrays))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
