import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from fdgatii.graph_data import Graph, make_synthetic

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DATA_ROOT = Path(os.environ.get("FDGATII_DATA", Path(__file__).resolve().parents[1] / "data"))


def random_graph(rng, n, p=0.3, d=3, classes=3):
    upper = np.triu(rng.random((n, n)) < p, k=1)
    pairs = np.argwhere(upper)
    feats = rng.normal(size=(n, d))
    labels = rng.integers(0, classes, size=n)
    return Graph.from_edges(feats, labels, pairs, num_classes=classes)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_graph():
    return make_synthetic(n=40, num_features=8, num_classes=3, edge_homophily=0.7, seed=3)


@pytest.fixture
def path3():
    return Graph.from_edges(np.array([[1.0], [2.0], [3.0]]), [0, 1, 0], [(0, 1), (1, 2)])


# one line per acceptance criterion, filled by test_acceptance and echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
