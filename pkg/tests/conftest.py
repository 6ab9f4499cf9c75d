import numpy as np
import pytest

from fracnls.spectral import FourierState


def random_state(rng, K, decay=0.0):
    n = np.abs(np.arange(-K, K + 1))
    c = (rng.standard_normal(2 * K + 1) + 1j * rng.standard_normal(2 * K + 1)) / (1.0 + n) ** decay
    return FourierState(c)


def triple_loop_cubic(c, N):
    """Pi_N(|u|^2 u) by brute force over all (n1, n2, n3) with n1 - n2 + n3 = n."""
    K = len(c) // 2
    out = np.zeros(2 * N + 1, dtype=complex)
    rng = range(-min(K, N), min(K, N) + 1)
    for n1 in rng:
        for n2 in rng:
            for n3 in rng:
                n = n1 - n2 + n3
                if abs(n) <= N:
                    out[n + N] += c[n1 + K] * np.conj(c[n2 + K]) * c[n3 + K]
    return out


def rel(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    scale = max(np.max(np.abs(b)), 1e-300)
    return float(np.max(np.abs(a - b)) / scale)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, echoed again in the terminal summary
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
