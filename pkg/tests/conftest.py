import numpy as np
import pytest

from subloo.draws import DrawsBundle


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_bundle(rng, S=50, n=4, exact=False):
    log_lik = rng.normal(-1.0, 0.5, size=(S, n))
    log_p = rng.normal(size=S)
    log_q = log_p.copy() if exact else rng.normal(size=S)
    return DrawsBundle(log_lik=log_lik, log_p=log_p, log_q=log_q)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
