from __future__ import annotations

import pytest

from enclosing import bundled_scenario, parse_scenario, run

# filled by test_acceptance.py, echoed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def cfg_a():
    return parse_scenario(bundled_scenario("paper_sim_a"))


@pytest.fixture(scope="session")
def cfg_b():
    return parse_scenario(bundled_scenario("paper_sim_b"))


@pytest.fixture(scope="session")
def log_a(cfg_a):
    return run(cfg_a)


@pytest.fixture(scope="session")
def log_b(cfg_b):
    return run(cfg_b)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
