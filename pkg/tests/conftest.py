from fractions import Fraction

import pytest

from cohmms.space import FiniteMMS

_ACCEPTANCE: list[tuple[str, str]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported in the summary")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    crit = dict(report.user_properties).get("criterion")
    if crit:
        _ACCEPTANCE.append((crit, "PASS" if report.passed else "FAIL"))


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker and ("criterion", marker.args[0]) not in item.user_properties:
        item.user_properties.append(("criterion", marker.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, status in _ACCEPTANCE:
        terminalreporter.write_line(f"[{status}] {name}")


@pytest.fixture
def one_point():
    return FiniteMMS.from_arrays([[0]], exact=True)


@pytest.fixture
def two_point():
    return FiniteMMS.from_arrays([[0, 1], [1, 0]], [Fraction(1, 2), Fraction(1, 2)], exact=True)


@pytest.fixture
def two_point_float():
    return FiniteMMS.from_arrays([[0.0, 1.0], [1.0, 0.0]], [0.5, 0.5])


@pytest.fixture
def three_point():
    """d01 = 1, d02 = 1.2, d12 = 1.5 with uniform mass."""
    d = [[0, 1, Fraction(6, 5)], [1, 0, Fraction(3, 2)], [Fraction(6, 5), Fraction(3, 2), 0]]
    return FiniteMMS.from_arrays(d, exact=True)


@pytest.fixture
def three_point_float():
    d = [[0, 1.0, 1.2], [1.0, 0, 1.5], [1.2, 1.5, 0]]
    return FiniteMMS.from_arrays(d)


@pytest.fixture
def equilateral3():
    return FiniteMMS.from_arrays([[0, 1, 1], [1, 0, 1], [1, 1, 0]], exact=True)
