import numpy as np
import pytest


def random_spd(rng, p, cond=100.0, n=None):
    """SPD matrices with log-uniform spectrum spanning ``cond``."""
    shape = () if n is None else (n,)
    q, _ = np.linalg.qr(rng.standard_normal(shape + (p, p)))
    evals = np.exp(rng.uniform(0, np.log(cond), size=shape + (p,)))
    out = (q * evals[..., None, :]) @ np.swapaxes(q, -1, -2)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def random_sym(rng, p, scale=1.0):
    m = scale * rng.standard_normal((p, p))
    return 0.5 * (m + m.T)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one summary line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
