import sys

import numpy as np
import pytest

from qmpo.driver import QmpoProblem


def random_stiefel(rng, n, l):
    Q, R = np.linalg.qr(rng.standard_normal((n, l)))
    return Q * np.sign(np.diag(R))


def random_sym(rng, n, scale=1.0):
    A = rng.standard_normal((n, n))
    return scale * (A + A.T) / 2


def dense_problem(rng, n, l, shift=0.0):
    H = random_sym(rng, n) + shift * np.eye(n)
    return QmpoProblem(H, rng.standard_normal((n, l)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
