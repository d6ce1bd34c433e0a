import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("cgokit", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("cgokit")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def gaussian(z, c=0j, w=0.3):
    return np.exp(-np.abs(z - c) ** 2 / w ** 2)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("_cgokit_acceptance")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
