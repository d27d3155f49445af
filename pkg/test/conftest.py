"""
Master file for pytest fixtures.
Any fixtures declared here are available to all test functions in this directory.
"""


import logging

import numpy as np
import pytest

from sqrt_gaps import arith, seq, testfn


@pytest.fixture(scope='session', autouse=True)
def log_enabled():
    """Sets log level to DEBUG for all test functions.
    Allows all logged messages to be captured during pytest runs"""
    logging.getLogger().setLevel(logging.DEBUG)
    logging.captureWarnings(True)


@pytest.fixture(scope='session')
def strict_tf() -> testfn.TestFunctionSet:
    return testfn.default_test_functions()


@pytest.fixture(scope='session')
def relaxed_tf() -> testfn.TestFunctionSet:
    return testfn.default_test_functions(eta=0.5, s=1.0, mode='relaxed')


@pytest.fixture(scope='session')
def small_seq() -> seq.FracSequence:
    return seq.build_sequence(1000, threads=1)


@pytest.fixture(scope='session')
def desk_seq() -> seq.FracSequence:
    return seq.build_sequence(10**4, threads=1)


@pytest.fixture(scope='session')
def desk_qset() -> arith.QSet:
    # Delta = 1.5, N = 10^4: moduli 7b and 11b with b prime, 8 members
    return arith.build_qset(1.5, 10**4)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
