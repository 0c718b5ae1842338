import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from wardnet import Dataset, LayeredDnn, PowerLoss  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def f1():
    """d=1, C=2, no hidden layer, x=(1), A=(1, 2), beta=2."""
    data = Dataset(np.array([[1.0]]), np.array([[1.0, 0.0]]), normalized_inputs=True)
    loss = PowerLoss(np.array([[1.0], [2.0]]), 2.0)
    return data, loss


@pytest.fixture
def f2():
    """F1 shape with the classification loss for label 0: A=(0, 1)."""
    data = Dataset(np.array([[1.0]]), np.array([[1.0, 0.0]]), normalized_inputs=True)
    return data, PowerLoss.classification(data)


@pytest.fixture
def f3():
    """d=2, one hidden layer of width 3, C=3, one sample x=(0.5, 0.5) of class 0."""
    data = Dataset(np.array([[0.5, 0.5]]), np.array([[1.0, 0.0, 0.0]]), normalized_inputs=True)
    dnn = LayeredDnn((2, 3, 3), (np.full((3, 2), 1 / 3), np.full((3, 3), 1 / 3)))
    return dnn, data, PowerLoss.classification(data)


def single_layer(b):
    b = np.asarray(b, dtype=float)
    return LayeredDnn(b.shape[::-1], (b,))
