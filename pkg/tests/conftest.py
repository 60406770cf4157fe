import numpy as np
import pytest


def make_rng(seed: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


@pytest.fixture
def rng():
    return make_rng(20240611)


def low_rank(rng, n, q, r, scale=1.0):
    return scale * rng.standard_normal((n, r)) @ rng.standard_normal((r, q))


def eig_singular_values(m):
    """Singular values through the eigenvalues of m^T m (independent of the SVD kernel)."""
    vals = np.linalg.eigvalsh(m.T @ m)[::-1]
    h = min(m.shape)
    return np.sqrt(np.maximum(vals[:h], 0.0))


# One line per acceptance criterion, printed at the end of the run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
