import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_config(rng, n, spread=1.0):
    """Random positions with all pairs at least 0.2 * spread apart."""
    while True:
        z = rng.uniform(-spread, spread, 2 * n)
        p = z.reshape(-1, 2)
        d = np.hypot(*(p[:, None] - p[None]).transpose(2, 0, 1))
        if n < 2 or d[np.triu_indices(n, 1)].min() > 0.2 * spread:
            return z


def random_gamma(rng, n, mixed=True):
    while True:
        g = rng.uniform(-2, 2, n) if mixed else rng.uniform(0.2, 2, n)
        if np.all(np.abs(g) > 0.1) and abs(g.sum()) > 0.1:
            return g


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
