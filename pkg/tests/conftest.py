import numpy as np
import pytest

from stackelberg_observer.config import load_bundled
from stackelberg_observer.observer import synthesize_lmi
from stackelberg_observer.solver import solve_are

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion implemented by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if rep.when == "call" or rep.failed:
        ok = rep.passed and _ACCEPTANCE.get(number, (title, True))[1]
        _ACCEPTANCE[number] = (title, ok)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, ok = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {title}")


@pytest.fixture(scope="session")
def example():
    return load_bundled("paper_section5")


@pytest.fixture(scope="session")
def example_solution(example):
    return solve_are(example.model, example.weights)


@pytest.fixture(scope="session")
def example_design(example, example_solution):
    return synthesize_lmi(example.model, example_solution.K1, example_solution.K2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
