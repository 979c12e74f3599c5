import warnings

import numpy as np
import pytest

from wgf2d.medium import Incidence, LayerStack, planar_coefficients


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: spec acceptance criteria")
    config.addinivalue_line("markers", "slow: long-running solves")


@pytest.fixture(autouse=True)
def _quiet_coverage_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings(
            "ignore", message=".*extends beyond the w = 1 region.*"
        )
        yield


@pytest.fixture(scope="session")
def stack3():
    """The three-layer medium of the main experiments."""
    return LayerStack(wavenumbers=(10.0, 20.0, 30.0), depths=(0.0, 1.5), nu=(1.0, 1.0))


@pytest.fixture(scope="session")
def inc3():
    return Incidence(alpha=-np.pi / 3)


@pytest.fixture(scope="session")
def sol3(stack3, inc3):
    return planar_coefficients(stack3, inc3)


@pytest.fixture(scope="session")
def slab_stack():
    """The far-field slab: k1 = k3 = 10, k2 = 15."""
    return LayerStack(wavenumbers=(10.0, 15.0, 10.0), depths=(0.0, 1.5), nu=(1.0, 1.0))
