"""
Shared pytest fixtures and the --runslow switch for the long training runs.
"""

import numpy as np
import pytest

from config import TestingConfig


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
                     help="run the toy-training acceptance tests")


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: long-running training test (needs --runslow)')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def settings():
    return TestingConfig
