import numpy as np
import pytest

from sphquad.geometry import NodeSet

SQ3 = 1.0 / np.sqrt(3.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_nodes(n, seed=0):
    P = np.random.default_rng(seed).standard_normal((n, 3))
    return NodeSet(P)


@pytest.fixture
def tetrahedron():
    return NodeSet(np.array([[1, 1, 1], [-1, -1, 1], [-1, 1, -1], [1, -1, -1]], float) * SQ3)


@pytest.fixture
def octahedron():
    return NodeSet(np.vstack((np.eye(3), -np.eye(3))))


def random_rotation(rng):
    Q, R = np.linalg.qr(rng.standard_normal((3, 3)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] *= -1
    return Q


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=str):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
