import numpy as np
import pytest

from hetcache.coefficients import compute_coefficients
from hetcache.model import builtin_scenario


@pytest.fixture(scope="session")
def scaled():
    return builtin_scenario("scaled")


@pytest.fixture(scope="session")
def scaled_coeffs(scaled):
    return compute_coefficients(scaled)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when != "call":
                continue
            for key, value in rep.user_properties:
                if key == "acceptance":
                    lines.append((value[0], f"{outcome[:4].upper():4s} criterion {value[0]}: {value[1]}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
