import numpy as np
import pytest

from labeldiv.binning import Interval, equal_width_base, equal_width_overlapping


@pytest.fixture
def ages_base():
    return equal_width_base(Interval(21, 61), 40)


@pytest.fixture
def ages_ensemble(ages_base):
    return equal_width_overlapping(ages_base, 8, 5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import REPORT

    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(REPORT):
            terminalreporter.write_line(line)
