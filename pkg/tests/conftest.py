import functools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from phiflow.phi_calculus import PhiCalculus, PhiFunction
from phiflow.space import Potential, WeightedSpace, normalized_reference

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

POWERS = (0.5, 0.75, 0.9, 1.0, 1.2, 1.5, 2.0)


@functools.lru_cache(maxsize=None)
def calc_for(m: float, method: str = "auto") -> PhiCalculus:
    return PhiCalculus(PhiFunction.power(m), method=method)


@functools.lru_cache(maxsize=None)
def gaussian_ref(m: float = 1.0, n: int = 512, a: float = -8.0, b: float = 8.0, k: float = 1.0):
    """Normalized reference for the potential ``k x**2 / 2``."""
    sp = WeightedSpace.segment(a, b, n)
    return normalized_reference(sp, calc_for(m), Potential.named("quadratic", k=k))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, filled by test_acceptance and echoed in the summary
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
