import numpy as np
import pytest

from decom_alm.liability import EconomicParams, build_schedule

DEFAULT_BUCKET_TOTALS = [200, 950, 5550, 7950, 2700, 1500, 500]


@pytest.fixture(scope="session")
def econ():
    return EconomicParams()


@pytest.fixture(scope="session")
def schedule():
    return build_schedule()


def spreadsheet_payments(amounts=DEFAULT_BUCKET_TOTALS):
    """Payment list built cell by cell: bucket i, month k -> ((60 i + k) / 12, total / 60)."""
    rows = []
    for i, total in enumerate(amounts):
        for k in range(1, 61):
            rows.append(((60 * i + k) / 12.0, total / 60.0))
    return rows


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# Criterion outcomes recorded by the acceptance suite, echoed after the run.
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
