import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("fast", max_examples=10, deadline=None)
settings.load_profile("default")


@pytest.fixture
def nprng():
    return np.random.default_rng(12345)


def random_spd(rng, d, cond_exp=2.0):
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    lam = 10.0 ** rng.uniform(-cond_exp / 2, cond_exp / 2, d)
    return (Q * lam) @ Q.T


def random_orthonormal_pair(rng, d):
    Q, _ = np.linalg.qr(rng.standard_normal((d, 2)))
    return Q[:, 0], Q[:, 1]


# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
