import numpy as np
import pytest

from stablab.synth_data import DatasetSpec, LabeledDataset, generate_dataset


@pytest.fixture
def small_ds():
    return generate_dataset(DatasetSpec(n=40, seed=7))


@pytest.fixture
def two_point_ds():
    return LabeledDataset(np.array([[1.0, 0.0], [-1.0, 0.0]]), np.array([1.0, -1.0]))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running statistical checks")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
