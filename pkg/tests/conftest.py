import numpy as np
import pytest

from lyapbound.ensemble import discrete

# criterion -> (passed, detail), filled by test_acceptance and printed at the end
ACCEPTANCE: dict = {}


def random_ensemble(i: int, dims=(2, 3, 4)):
    """Invertible (almost surely) Gaussian ensemble, alternating real and complex."""
    rng = np.random.default_rng(1000 + i)
    d = dims[i % len(dims)]
    K = int(rng.integers(2, 5))
    A = rng.standard_normal((K, d, d))
    if i % 2:
        A = A + 1j * rng.standard_normal((K, d, d))
    return discrete(A, rng.dirichlet(np.ones(K)))


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
