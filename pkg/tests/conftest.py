import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

finite = st.floats(min_value=-3.0, max_value=3.0, allow_nan=False, allow_infinity=False)


def vectors(n):
    return arrays(np.float64, (n,), elements=finite)


def random_rotation(rng):
    """Uniformly distributed proper rotation."""
    Q, R = np.linalg.qr(rng.standard_normal((3, 3)))
    Q = Q @ np.diag(np.sign(np.diag(R)))
    if np.linalg.det(Q) < 0:
        Q[:, 0] *= -1.0
    return Q


@st.composite
def rotations(draw):
    seed = draw(st.integers(min_value=0, max_value=2**32 - 1))
    return random_rotation(np.random.default_rng(seed))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance verdicts, reported once at the end of the session
ACCEPTANCE = {}


def record_verdict(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title} ({detail})"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
