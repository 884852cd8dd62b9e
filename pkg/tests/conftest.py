import sys
import numpy as np
import pytest

from topoinfer.topologies import random_minimal_tree, random_ring


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def trees(count, lo=4, hi=20, seed=0):
    """Seeded random minimal trees with ``lo..hi`` leaves."""
    rng = np.random.default_rng(seed)
    return [random_minimal_tree(int(rng.integers(lo, hi + 1)), rng) for _ in range(count)]


def rings(count, lo=5, hi=15, seed=0):
    rng = np.random.default_rng(seed)
    return [random_ring(int(rng.integers(lo, hi + 1)), rng) for _ in range(count)]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
