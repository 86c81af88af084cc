import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def takagi_half():
    """Classical Takagi T_{1/2,2} on a dyadic grid of [0, 1]."""
    from assouad_graphs.funcspace import TakagiSpec, sample_function
    return sample_function(TakagiSpec(0.5, 2.0), 0.0, 1.0, 2 ** 14 + 1)


@pytest.fixture(scope="session")
def takagi_sqrt():
    """T_{2^-1/2, 2} (alpha = 1/2) on 2^16 + 1 samples."""
    from assouad_graphs.funcspace import TakagiSpec, sample_function
    return sample_function(TakagiSpec(2 ** -0.5, 2.0), 0.0, 1.0, 2 ** 16 + 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = []


@pytest.fixture
def record_criterion():
    """Record one acceptance line; printed at once and again in the summary."""
    def record(number, passed, detail, seconds):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}  [{seconds:.1f} s]"
        ACCEPTANCE.append((number, line))
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
